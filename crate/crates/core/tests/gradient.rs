mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;

#[test]
fn adjoint_matches_finite_differences() {
    let cases: Vec<_> = ALL_KINDS.iter().flat_map(|&kind| (1..=3).map(move |k| (kind, k))).collect();
    let errs: Vec<_> = cases
        .par_iter()
        .map(|&(kind, k)| {
            let m = manifold(kind);
            let mut rng = ChaCha8Rng::seed_from_u64(17 + k as u64);
            let s = random_state(m.as_ref(), k, &mut rng);
            let data = random_data(m.as_ref(), 4, &mut rng);
            let (adj, fd) = gradient_pair(m.as_ref(), &s, &data, 1000, 1e-5);
            (kind, k, relative_error(&adj, &fd))
        })
        .collect();
    for (kind, k, e) in &errs {
        println!("{kind} k={k}: relative error {e:.3e}");
    }
    assert!(errs.iter().all(|(_, _, e)| *e < 1e-3));
}
