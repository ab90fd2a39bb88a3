#![allow(dead_code)]

use loggas::equilibrium::{
    build_equilibrium, Equilibrium, Potential, DEFAULT_DELTA, WORKING_INTERVAL,
};
use loggas::ChebSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const QUADRATIC: &str = "poly:0,0,1";
pub const QUARTIC: &str = "poly:0,0,-0.5,0,1";

pub fn equilibrium(spec: &str) -> Equilibrium {
    build_equilibrium(&Potential::parse(spec).unwrap(), DEFAULT_DELTA).unwrap()
}

pub fn semicircle() -> Equilibrium {
    equilibrium(QUADRATIC)
}

pub fn quartic() -> Equilibrium {
    equilibrium(QUARTIC)
}

/// `T_k(x)` on the working interval.
pub fn cheb(k: usize) -> ChebSeries {
    let mut c = vec![0.0; k + 1];
    c[k] = 1.0;
    let lifted = ChebSeries::new((-1.0, 1.0), c).unwrap();
    lifted.reinterval(WORKING_INTERVAL, k).unwrap()
}

/// Uniform points strictly inside `U`.
pub fn uniform_config(rng: &mut ChaCha8Rng, n: usize, eq: &Equilibrium) -> Vec<f64> {
    let (lo, hi) = eq.u_interval();
    let margin = 1e-9;
    (0..n)
        .map(|_| rng.gen_range(lo + margin..hi - margin))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sup |f| + sup |f'| + sup |f''|` on an interval.
pub fn c2_norm(f: &ChebSeries, interval: (f64, f64)) -> f64 {
    let d1 = f.derivative();
    let d2 = d1.derivative();
    [f, &d1, &d2]
        .iter()
        .map(|g| g.sup_norm_on(interval, 2001))
        .sum()
}

/// `cos(k arccos x)`, valid on [-1, 1].
pub fn chebyshev_t(k: usize, x: f64) -> f64 {
    (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}
