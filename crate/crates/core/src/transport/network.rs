use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bits in one megabit. Bit rates use binary prefixes throughout, which is
/// what makes the raw 960×540×24×30 stream come out at 355.96 Mbps.
pub const BITS_PER_MEGABIT: f64 = 1_048_576.0;

/// One-way link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkModel {
    pub bandwidth_mbps: f64,
    pub latency_ms: f64,
    /// Uniform extra delay in `[0, jitter_ms)`; arrivals stay in order.
    pub jitter_ms: f64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            bandwidth_mbps: 100.0,
            latency_ms: 20.0,
            jitter_ms: 0.0,
        }
    }
}

/// A serializing, in-order channel under a [`NetworkModel`]. Times are in
/// seconds.
#[derive(Debug, Clone)]
pub struct Link {
    model: NetworkModel,
    free_at: f64,
    last_arrival: f64,
    rng: ChaCha8Rng,
}

impl Link {
    pub fn new(model: NetworkModel, seed: u64) -> Self {
        Link {
            model,
            free_at: 0.0,
            last_arrival: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    /// Arrival time of a `bytes`-long message handed over at `t_send`.
    pub fn deliver(&mut self, bytes: usize, t_send: f64) -> f64 {
        let start = t_send.max(self.free_at);
        let tx = bytes as f64 * 8.0 / (self.model.bandwidth_mbps * BITS_PER_MEGABIT);
        self.free_at = start + tx;
        let jitter = if self.model.jitter_ms > 0.0 {
            self.rng.gen_range(0.0..self.model.jitter_ms) / 1e3
        } else {
            0.0
        };
        let arrival = (start + tx + self.model.latency_ms / 1e3 + jitter).max(self.last_arrival);
        self.last_arrival = arrival;
        arrival
    }
}

/// Average bit rate in Mbps of `total_bytes` over `duration_s`.
pub fn measure_bandwidth(total_bytes: u64, duration_s: f64) -> f64 {
    if total_bytes == 0 || duration_s <= 0.0 {
        return 0.0;
    }
    total_bytes as f64 * 8.0 / duration_s / BITS_PER_MEGABIT
}

/// Uncompressed 24-bit video at the given size and frame rate, in Mbps.
pub fn raw_image_baseline_mbps(width: u32, height: u32, fps: f64) -> f64 {
    width as f64 * height as f64 * 24.0 * fps / BITS_PER_MEGABIT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn megabyte_at_hundred_megabits() {
        let mut link = Link::new(NetworkModel::default(), 0);
        let t = link.deliver(1 << 20, 0.0);
        assert!((t - 0.100).abs() < 1e-12);
    }

    #[test]
    fn empty_payload_costs_latency_only() {
        let mut link = Link::new(NetworkModel::default(), 0);
        assert!((link.deliver(0, 1.5) - 1.52).abs() < 1e-12);
    }

    #[test]
    fn back_to_back_messages_stay_ordered() {
        let model = NetworkModel {
            jitter_ms: 30.0,
            ..NetworkModel::default()
        };
        let mut link = Link::new(model, 1);
        let mut last = 0.0;
        for i in 0..100 {
            let t = link.deliver(1000 * (i % 7), 0.001 * i as f64);
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn raw_baseline_values() {
        assert!((raw_image_baseline_mbps(960, 540, 30.0) - 355.96).abs() < 0.005);
        assert_eq!(measure_bandwidth(0, 10.0), 0.0);
        assert!((measure_bandwidth(1 << 17, 1.0) - 1.0).abs() < 1e-12);
    }
}
