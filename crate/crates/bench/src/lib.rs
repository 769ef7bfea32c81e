//! Synthetic datasets for benchmarks.

use neca_core::Cad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` records over `m` attributes with `domain` values each, grouped into `classes`
/// latent classes that bias the value choice so the networks have structure.
pub fn synthetic_cad(n: usize, m: usize, domain: usize, classes: usize, seed: u64) -> Cad {
    assert!(n > 0 && m > 0 && domain > 0 && classes > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..m).map(|j| format!("a{j}")).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = rng.gen_range(0..classes);
        let row = (0..m)
            .map(|j| {
                let v = if rng.gen_bool(0.7) {
                    (class + j) % domain
                } else {
                    rng.gen_range(0..domain)
                };
                format!("v{v}")
            })
            .collect();
        rows.push(row);
        labels.push(format!("c{class}"));
    }
    Cad::from_token_rows(names, rows, Some(labels)).expect("synthetic rows are rectangular")
}
