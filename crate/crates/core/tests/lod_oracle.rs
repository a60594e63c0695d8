//! Property tests: incremental searches against the exhaustive oracle.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use proptest::prelude::*;
use splatstream::harness::{gen_synthetic_scene, Layout};
use splatstream::lod::{find_cut_exhaustive, find_cut_streaming_with, find_cut_temporal, validate_cut, StreamingOptions};
use splatstream::{Intrinsics, LoDTree, Pose, SceneConfig};

fn tree_for(seed: u64, n: usize, layout: Layout, max_children: usize) -> LoDTree {
    let g = gen_synthetic_scene(seed, n, layout).unwrap();
    LoDTree::build(
        g,
        &SceneConfig {
            max_children,
            ..SceneConfig::default()
        },
    )
    .unwrap()
}

fn layout() -> impl Strategy<Value = Layout> {
    prop_oneof![Just(Layout::CityGrid), Just(Layout::Uniform), Just(Layout::Clustered)]
}

fn eye() -> impl Strategy<Value = Vector3<f32>> {
    (-80.0f32..80.0, 0.5f32..60.0, -80.0f32..80.0).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn searches_match_the_oracle(
        seed in 0u64..1000,
        n in 50usize..800,
        layout in layout(),
        max_children in 2usize..9,
        tau in prop_oneof![Just(0.5f32), Just(3.0), 0.2f32..40.0],
        a in eye(),
        b in eye(),
        step in 0.0f32..1.0,
    ) {
        let tree = tree_for(seed, n, layout, max_children);
        let intr = Intrinsics::from_fov(320, 180, 60.0);
        let opts = StreamingOptions { record_visits: true, ..StreamingOptions::default() };
        let mut prev = None;
        // Two poses, the second a partial move from the first.
        for (f, e) in [a, a + (b - a) * step].into_iter().enumerate() {
            let cam = intr.at(&Pose::look_at(e, Vector3::zeros(), Vector3::y()));
            let (oracle, _) = find_cut_exhaustive(&tree, &cam, tau, f as u32);
            prop_assert!(validate_cut(&tree, &oracle, &cam).is_ok());
            let (streamed, stats) = find_cut_streaming_with(&tree, &cam, tau, f as u32, &opts);
            prop_assert_eq!(&streamed, &oracle);
            let visited: BTreeSet<u32> = stats.visited_ids.unwrap().into_iter().collect();
            let mut closure: BTreeSet<u32> = oracle.ids().collect();
            for id in oracle.ids() {
                closure.extend(tree.ancestors(id));
            }
            prop_assert_eq!(visited, closure);
            if let Some(p) = &prev {
                let (t, _) = find_cut_temporal(&tree, p, &cam, tau, f as u32).unwrap();
                prop_assert_eq!(&t, &oracle);
                let weights_equal = t.entries.iter().zip(&oracle.entries).all(|(x, y)| x.t.to_bits() == y.t.to_bits());
                prop_assert!(weights_equal);
            }
            prev = Some(streamed);
        }
    }
}
