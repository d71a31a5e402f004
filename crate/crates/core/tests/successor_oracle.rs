use channelfield::chains::is_successor;
use channelfield::rng::stream;
use channelfield::tessellation::TessellationView;
use channelfield::verify::{lattice_configuration, successor_oracle};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn indexed_successor_matches_grid(seed in any::<u64>(), pick in 0usize..64, step in 0i32..64) {
        let mut rng = stream(seed, 0);
        let view = TessellationView::new(lattice_configuration(&mut rng, 1.5).unwrap());
        let n = view.len();
        let (i, j) = if pick % 3 == 0 { (pick % n, (pick / 3 + 1) % n) } else { (0, 1) };
        prop_assume!(i != j);
        let d = view.domain(i);
        let (lo, hi) = if view.point(i).sigma.axis() == 0 { (d.x0, d.x1) } else { (d.y0, d.y1) };
        let level = (lo + f64::from(step) / 2.0).min(hi);
        prop_assert_eq!(is_successor(i, j, level, &view).unwrap(), successor_oracle(i, j, level, &view).unwrap());
    }
}
