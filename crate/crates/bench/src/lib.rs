//! Shared fixtures for the benchmarks.

use aqurate_core::{
    generate_sparse_signal, sample_at, AClkTrace, MeasurementOperator, MeasurementSet, SignalOptions, SparseSignal,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RecoveryFixture {
    pub signal: SparseSignal,
    pub y: MeasurementSet,
    pub a: MeasurementOperator,
}

/// A frame of length `n` at sparsity `rate`, observed at a Bernoulli(`p`)
/// subset of the Nyquist grid.
pub fn recovery_fixture(n: usize, rate: f64, p: f64, seed: u64) -> RecoveryFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = generate_sparse_signal(n, rate, &SignalOptions::default(), &mut rng).expect("valid fixture");
    let instants: Vec<usize> = (0..n).filter(|_| rng.random_bool(p)).collect();
    let trace = AClkTrace::new(instants, n, 0).expect("instants in range");
    let y = sample_at(&signal, &trace).expect("matching lengths");
    let a = MeasurementOperator::new(trace.instants(), n).expect("valid operator");
    RecoveryFixture { signal, y, a }
}
