import init, { Demo, lut_error } from "./pkg/splatstream_web.js";

const $ = (id) => document.getElementById(id);
const view = $("view");
const ctx = view.getContext("2d");
const inputs = ["angle", "distance", "tau"].map($);

let demo;
let pending = false;

function params() {
  return {
    angle: +$("angle").value,
    distance: +$("distance").value,
    tau: +$("tau").value,
    lutM: $("lut-on").checked ? +$("lut-m").value : 0,
  };
}

function draw() {
  pending = false;
  const p = params();
  for (const el of inputs) $(el.id + "-v").textContent = el.value;
  const t0 = performance.now();
  const px = demo.render(p.angle, p.distance, p.tau, p.lutM);
  const ms = performance.now() - t0;
  ctx.putImageData(new ImageData(new Uint8ClampedArray(px), view.width, view.height), 0, 0);

  const s = demo.stats();
  const rows = [
    ["tree nodes", s.nodes],
    ["cut size", s.cut_size],
    ["visited, full search", s.streaming_visited],
    ["visited, from previous cut", s.temporal_visited],
    ["kept from previous cut", s.overlap.toFixed(2) + " %"],
    ["frame time", ms.toFixed(1) + " ms"],
  ];
  s.free();
  $("stats").innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
}

function schedule() {
  if (!pending) {
    pending = true;
    requestAnimationFrame(draw);
  }
}

function plotLut() {
  const c = $("lut");
  const g = c.getContext("2d");
  const ms = [2, 4, 8, 16, 32, 64, 128, 256];
  const errs = ms.map((m) => lut_error(m, 20001));
  const lo = Math.log10(Math.min(...errs)) - 0.2;
  const hi = Math.log10(Math.max(...errs)) + 0.2;
  const x = (i) => 30 + (i * (c.width - 40)) / (ms.length - 1);
  const y = (e) => 10 + ((hi - Math.log10(e)) * (c.height - 40)) / (hi - lo);
  g.fillStyle = "#000";
  g.fillRect(0, 0, c.width, c.height);
  g.strokeStyle = "#6cf";
  g.beginPath();
  errs.forEach((e, i) => (i ? g.lineTo(x(i), y(e)) : g.moveTo(x(i), y(e))));
  g.stroke();
  g.fillStyle = "#ddd";
  g.font = "11px sans-serif";
  errs.forEach((e, i) => {
    g.fillRect(x(i) - 2, y(e) - 2, 4, 4);
    g.fillText(ms[i], x(i) - 6, c.height - 12);
  });
  g.fillText(`m=32: ${(errs[4] * 100).toFixed(2)} %`, 40, 24);
}

function bindDrag() {
  let last = null;
  view.addEventListener("pointerdown", (e) => {
    last = e.clientX;
    view.setPointerCapture(e.pointerId);
  });
  view.addEventListener("pointerup", () => (last = null));
  view.addEventListener("pointermove", (e) => {
    if (last === null) return;
    const a = $("angle");
    a.value = (((+a.value + (e.clientX - last) * 0.5) % 360) + 360) % 360;
    last = e.clientX;
    schedule();
  });
  view.addEventListener("wheel", (e) => {
    e.preventDefault();
    const d = $("distance");
    d.value = Math.min(+d.max, Math.max(+d.min, +d.value * Math.exp(e.deltaY * 0.001)));
    schedule();
  });
}

async function main() {
  await init();
  $("status").textContent = "building scene...";
  await new Promise((r) => setTimeout(r, 0));
  demo = new Demo(20000, 1n, view.width, view.height);
  $("status").textContent = `${demo.node_count()} nodes`;
  for (const el of [...inputs, $("lut-on"), $("lut-m")]) el.addEventListener("input", schedule);
  bindDrag();
  plotLut();
  draw();
}

main().catch((e) => ($("status").textContent = "error: " + e));
