//! Fixtures shared by the criterion benchmarks.

use nalgebra::DVector;
use qmh_core::linalg::C64;
use qmh_core::markov::{random_ring_model, Instance};
use qmh_core::qmci::LikelihoodOracle;

/// Ring chain with `n` states and a fixed likelihood draw.
pub fn ring(n: usize) -> Instance {
    random_ring_model(11, n, 0.3, 2.0)
}

/// Two unit vectors in `C^dim` with `|<a|b>|^2 = p`.
pub fn overlap_pair(p: f64, dim: usize) -> (DVector<C64>, DVector<C64>) {
    let mut a = DVector::from_element(dim, C64::new(0.0, 0.0));
    let mut b = a.clone();
    a[0] = C64::new(1.0, 0.0);
    b[0] = C64::new(p.sqrt(), 0.0);
    b[dim - 1] = C64::new(0.0, (1.0 - p).sqrt());
    (a, b)
}

/// Oracle with `terms` bounded terms per state.
pub fn oracle(states: usize, terms: usize) -> LikelihoodOracle {
    let t = (0..states).map(|x| (0..terms).map(|i| ((i * 7 + x * 3) % 11) as f64 * 0.1).collect()).collect();
    LikelihoodOracle::new(t, vec![0.0; states], 0.0, None).expect("finite terms")
}
