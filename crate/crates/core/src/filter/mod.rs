//! Bootstrap particle filter with multinomial resampling at every step.
//!
//! One filtering step is `propagate -> weigh -> estimate -> resample`. The
//! proposal is the transition density, so the incremental weight of a
//! particle is its observation likelihood `alpha = p(z_k | x_k)`. Weights
//! are kept as logs and normalized with a max shift.

pub mod resample;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{StateSpaceModel, StateVector};
use crate::rng::{SeedRecord, SimRng};

pub use resample::{counts_from_indices, multinomial_indices, ResampleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Predicted,
    Weighted,
    Resampled,
}

/// `m` particles at step `k` (1-based) together with their bookkeeping.
///
/// `origins[i]` is the ancestry origin of particle `i`: the index of the
/// first-step particle its path descends from. `parents[i]` is the index
/// of the pre-resampling particle that particle `i` was copied from at this
/// step; it is the identity until the cloud is resampled. Indices are
/// 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<S> {
    pub step: usize,
    pub particles: Vec<S>,
    pub log_alpha: Vec<f64>,
    pub weights: Vec<f64>,
    pub origins: Vec<usize>,
    pub parents: Vec<usize>,
    pub log_alpha_bar: f64,
    pub phase: Phase,
}

fn identity(m: usize) -> Vec<usize> {
    (0..m).collect()
}

impl<S: Clone> ParticleCloud<S> {
    /// Draws `m` particles from the law of the first hidden state.
    pub fn initialize<M, R>(model: &M, m: usize, rng: &mut R) -> Result<Self>
    where
        M: StateSpaceModel<State = S>,
        R: Rng + ?Sized,
    {
        if m == 0 {
            return Err(Error::InvalidArgument("particle count must be at least 1".into()));
        }
        let particles = (0..m).map(|_| model.sample_initial(rng)).collect();
        Ok(Self::fresh(1, particles))
    }

    fn fresh(step: usize, particles: Vec<S>) -> Self {
        let m = particles.len();
        Self {
            step,
            particles,
            log_alpha: vec![0.0; m],
            weights: vec![1.0 / m as f64; m],
            origins: identity(m),
            parents: identity(m),
            log_alpha_bar: 0.0,
            phase: Phase::Predicted,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn alpha_bar(&self) -> f64 {
        self.log_alpha_bar.exp()
    }

    fn expect_phase(&self, expected: Phase) -> Result<()> {
        if self.phase != expected {
            return Err(Error::InvalidArgument(format!(
                "cloud at step {} is {:?}, expected {:?}",
                self.step, self.phase, expected
            )));
        }
        Ok(())
    }

    /// Advances every particle through the transition kernel.
    pub fn propagate<M, R>(mut self, model: &M, rng: &mut R) -> Result<Self>
    where
        M: StateSpaceModel<State = S>,
        R: Rng + ?Sized,
    {
        self.expect_phase(Phase::Resampled)?;
        for p in self.particles.iter_mut() {
            *p = model.sample_transition(p, rng);
        }
        let m = self.len();
        self.step += 1;
        self.parents = identity(m);
        self.log_alpha.iter_mut().for_each(|a| *a = 0.0);
        self.log_alpha_bar = 0.0;
        self.phase = Phase::Predicted;
        Ok(self)
    }

    /// Weighs the predicted particles by the likelihood of `z`.
    pub fn weigh<M>(mut self, model: &M, z: &M::Obs) -> Result<Self>
    where
        M: StateSpaceModel<State = S>,
    {
        self.expect_phase(Phase::Predicted)?;
        for (la, p) in self.log_alpha.iter_mut().zip(&self.particles) {
            *la = model.observation_logdensity(p, z);
        }
        self.set_log_weights()?;
        Ok(self)
    }

    /// Normalizes the stored unnormalized log-weights.
    fn set_log_weights(&mut self) -> Result<()> {
        let max = self
            .log_alpha
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::WeightCollapse { step: self.step });
        }
        let mut total = 0.0;
        for (w, la) in self.weights.iter_mut().zip(&self.log_alpha) {
            *w = (la - max).exp();
            total += *w;
        }
        for w in self.weights.iter_mut() {
            *w /= total;
        }
        self.log_alpha_bar = max + total.ln() - (self.len() as f64).ln();
        self.phase = Phase::Weighted;
        Ok(())
    }

    /// Replaces the incremental log-weights directly. Used to exercise
    /// normalization independently of a model.
    pub fn with_log_alpha(mut self, log_alpha: Vec<f64>) -> Result<Self> {
        self.expect_phase(Phase::Predicted)?;
        if log_alpha.len() != self.len() {
            return Err(Error::InvalidArgument("one log-weight per particle required".into()));
        }
        self.log_alpha = log_alpha;
        self.set_log_weights()?;
        Ok(self)
    }

    /// Weighted mean of the particles' real embeddings.
    pub fn estimate<M>(&self, model: &M) -> Result<StateVector>
    where
        M: StateSpaceModel<State = S>,
    {
        self.expect_phase(Phase::Weighted)?;
        let dim = model.state_dim();
        let mut buf = vec![0.0; dim];
        let mut out = StateVector::zeros(dim);
        for (p, w) in self.particles.iter().zip(&self.weights) {
            if *w == 0.0 {
                continue;
            }
            model.write_state(p, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
        Ok(out)
    }

    /// Draws `m` particles i.i.d. by weight and resets weights to `1/m`.
    ///
    /// Copies are laid out in source order, so a copy of particle `j`
    /// carries `parents = j` and inherits `origins[j]`.
    pub fn multinomial_resample<R>(mut self, rng: &mut R) -> Result<(Self, ResampleRecord)>
    where
        R: Rng + ?Sized,
    {
        self.expect_phase(Phase::Weighted)?;
        let m = self.len();
        let picks = multinomial_indices(&self.weights, m, rng);
        let record = counts_from_indices(&picks, m);
        self.particles = picks.iter().map(|&j| self.particles[j].clone()).collect();
        self.origins = picks.iter().map(|&j| self.origins[j]).collect();
        self.log_alpha = picks.iter().map(|&j| self.log_alpha[j]).collect();
        self.parents = picks;
        self.weights = vec![1.0 / m as f64; m];
        self.phase = Phase::Resampled;
        Ok((self, record))
    }
}

/// Per-step record kept when a run retains its history: the weighted cloud
/// before resampling and the parent indices the resampling chose.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub weighted: ParticleCloud<S>,
    pub parents: Vec<usize>,
}

/// Output of [`run_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun<S> {
    pub particle_count: usize,
    pub estimates: Vec<StateVector>,
    pub log_alpha_bars: Vec<f64>,
    pub resample_counts: Vec<ResampleRecord>,
    pub history: Option<Vec<StepRecord<S>>>,
    pub seed: Option<SeedRecord>,
}

impl<S> FilterRun<S> {
    pub fn horizon(&self) -> usize {
        self.estimates.len()
    }

    pub fn final_estimate(&self) -> &StateVector {
        self.estimates.last().expect("runs have at least one step")
    }

    pub fn alpha_bars(&self) -> Vec<f64> {
        self.log_alpha_bars.iter().map(|l| l.exp()).collect()
    }

    /// `log(alpha_bar_1 ... alpha_bar_T)`, the log marginal-likelihood estimate.
    pub fn log_alpha_bar_product(&self) -> f64 {
        self.log_alpha_bars.iter().sum()
    }
}

/// Runs the filter over `z_{1:T}`, resampling after every weighting.
pub fn run_filter<M, R>(
    model: &M,
    observations: &[M::Obs],
    m: usize,
    rng: &mut R,
    retain: bool,
) -> Result<FilterRun<M::State>>
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    if observations.is_empty() {
        return Err(Error::InvalidArgument("at least one observation required".into()));
    }
    let horizon = observations.len();
    let mut estimates = Vec::with_capacity(horizon);
    let mut log_alpha_bars = Vec::with_capacity(horizon);
    let mut resample_counts = Vec::with_capacity(horizon);
    let mut history = retain.then(|| Vec::with_capacity(horizon));

    let mut cloud = ParticleCloud::initialize(model, m, rng)?;
    for (k, z) in observations.iter().enumerate() {
        if k > 0 {
            cloud = cloud.propagate(model, rng)?;
        }
        let weighted = cloud.weigh(model, z)?;
        estimates.push(weighted.estimate(model)?);
        log_alpha_bars.push(weighted.log_alpha_bar);
        let snapshot = history.as_ref().map(|_| weighted.clone());
        let (resampled, record) = weighted.multinomial_resample(rng)?;
        if let (Some(h), Some(w)) = (history.as_mut(), snapshot) {
            h.push(StepRecord {
                weighted: w,
                parents: resampled.parents.clone(),
            });
        }
        resample_counts.push(record);
        cloud = resampled;
    }

    Ok(FilterRun {
        particle_count: m,
        estimates,
        log_alpha_bars,
        resample_counts,
        history,
        seed: None,
    })
}

/// [`run_filter`] driven by the stream named in `seed`, recorded in the run.
pub fn run_filter_seeded<M>(
    model: &M,
    observations: &[M::Obs],
    m: usize,
    seed: SeedRecord,
    retain: bool,
) -> Result<FilterRun<M::State>>
where
    M: StateSpaceModel,
{
    let mut rng: SimRng = seed.rng();
    let mut run = run_filter(model, observations, m, &mut rng, retain)?;
    run.seed = Some(seed);
    Ok(run)
}

/// Predicted-particle indices along the path of resampled particle `i` at
/// step `k`: entry `l - 1` is the index at step `l` of its ancestor.
pub fn ancestor_indices<S>(history: &[StepRecord<S>], i: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    let mut idx = i;
    for l in (0..k).rev() {
        idx = history[l].parents[idx];
        out[l] = idx;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscreteHmmModel, LinearUniformModel, Observation, StochVolModel};
    use crate::rng::substream;
    use proptest::prelude::*;

    fn scalar_cloud(values: &[f64]) -> ParticleCloud<StateVector> {
        ParticleCloud::fresh(1, values.iter().map(|v| StateVector(vec![*v])).collect())
    }

    struct Scalar;
    impl StateSpaceModel for Scalar {
        type State = StateVector;
        type Obs = Observation;
        fn name(&self) -> &'static str {
            "scalar"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn obs_dim(&self) -> usize {
            1
        }
        fn sample_initial<R: rand::Rng + ?Sized>(&self, _: &mut R) -> StateVector {
            StateVector(vec![2.5])
        }
        fn sample_transition<R: rand::Rng + ?Sized>(&self, x: &StateVector, _: &mut R) -> StateVector {
            x.clone()
        }
        fn sample_observation<R: rand::Rng + ?Sized>(&self, _: &StateVector, _: &mut R) -> Observation {
            Observation(vec![0.0])
        }
        fn observation_logdensity(&self, _: &StateVector, _: &Observation) -> f64 {
            0.3f64.ln()
        }
        fn write_state(&self, x: &StateVector, out: &mut [f64]) {
            out.copy_from_slice(x);
        }
        fn write_observation(&self, z: &Observation, out: &mut [f64]) {
            out.copy_from_slice(z);
        }
        fn observation_from_values(&self, v: &[f64]) -> Result<Observation> {
            Ok(Observation(v.to_vec()))
        }
    }

    #[test]
    fn initialize_single_particle() {
        let c = ParticleCloud::initialize(&Scalar, 1, &mut substream(0, 0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.weights, vec![1.0]);
    }

    #[test]
    fn initialize_sets_identity_origins() {
        let c = ParticleCloud::initialize(&Scalar, 6, &mut substream(0, 0)).unwrap();
        assert_eq!(c.origins, vec![0, 1, 2, 3, 4, 5]);
        assert!(c.particles.iter().all(|p| p[0] == 2.5));
        assert!(ParticleCloud::initialize(&Scalar, 0, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn constant_likelihood_gives_uniform_weights() {
        let c = ParticleCloud::initialize(&Scalar, 4, &mut substream(0, 0))
            .unwrap()
            .weigh(&Scalar, &Observation(vec![0.0]))
            .unwrap();
        for w in &c.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((c.alpha_bar() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_particle_arithmetic() {
        let c = scalar_cloud(&[0.0, 1.0])
            .with_log_alpha(vec![0.2f64.ln(), 0.6f64.ln()])
            .unwrap();
        assert!((c.weights[0] - 0.25).abs() < 1e-15);
        assert!((c.weights[1] - 0.75).abs() < 1e-15);
        assert!((c.alpha_bar() - 0.4).abs() < 1e-15);
        let est = c.estimate(&Scalar).unwrap();
        assert!((est[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn one_particle_in_support_gets_all_weight() {
        let model = LinearUniformModel::default();
        let mut cloud = ParticleCloud::fresh(
            1,
            vec![
                StateVector(vec![4.0, 4.0, 4.0]),
                StateVector(vec![0.0, 0.0, 0.0]),
                StateVector(vec![-4.0, -4.0, -4.0]),
            ],
        );
        cloud = cloud.weigh(&model, &Observation(vec![0.1, -0.2])).unwrap();
        assert_eq!(cloud.weights, vec![0.0, 1.0, 0.0]);
        let est = cloud.estimate(&model).unwrap();
        assert_eq!(est, StateVector(vec![0.0, 0.0, 0.0]));
        let (res, rec) = cloud.multinomial_resample(&mut substream(1, 0)).unwrap();
        assert_eq!(rec.counts, vec![0, 3, 0]);
        assert!(res.particles.iter().all(|p| p.0 == vec![0.0; 3]));
        assert_eq!(res.origins, vec![1, 1, 1]);
    }

    #[test]
    fn all_particles_outside_support_collapse() {
        let model = LinearUniformModel::default();
        let cloud = ParticleCloud::fresh(3, vec![StateVector(vec![9.0; 3]); 4]);
        let err = cloud.weigh(&model, &Observation(vec![0.0, 0.0])).unwrap_err();
        assert_eq!(err, Error::WeightCollapse { step: 3 });
    }

    #[test]
    fn phase_order_is_enforced() {
        let cloud = scalar_cloud(&[1.0, 2.0]);
        assert!(cloud.estimate(&Scalar).is_err());
        assert!(cloud.clone().multinomial_resample(&mut substream(0, 0)).is_err());
        assert!(cloud.propagate(&Scalar, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn zero_noise_propagation_applies_transition_matrix() {
        let model = LinearUniformModel::default().with_zero_noise();
        let mut rng = substream(0, 0);
        let mut cloud = ParticleCloud::fresh(
            1,
            vec![StateVector(vec![1.0, 2.0, 3.0]), StateVector(vec![-1.0, 0.5, 4.0])],
        );
        cloud.phase = Phase::Resampled;
        let before = cloud.particles.clone();
        let next = cloud.propagate(&model, &mut rng).unwrap();
        assert_eq!(next.len(), 2);
        assert_eq!(next.step, 2);
        for (a, b) in before.iter().zip(&next.particles) {
            assert_eq!(b.0, model.apply_transition(a).to_vec());
        }
    }

    #[test]
    fn identity_transition_leaves_cloud_unchanged() {
        let model = DiscreteHmmModel::new(
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.5, 0.5]; 2],
        )
        .unwrap();
        let mut rng = substream(3, 0);
        let mut cloud = ParticleCloud::initialize(&model, 100, &mut rng).unwrap();
        cloud.phase = Phase::Resampled;
        let before = cloud.particles.clone();
        let after = cloud.propagate(&model, &mut rng).unwrap();
        assert_eq!(before, after.particles);
    }

    #[test]
    fn single_step_is_self_normalized_importance_sampling() {
        let model = StochVolModel::default();
        let z = vec![Observation(vec![0.4, -1.2, 2.0])];
        let run = run_filter(&model, &z, 200, &mut substream(21, 1), false).unwrap();
        // replay the same draws by hand
        let mut rng = substream(21, 1);
        let draws: Vec<StateVector> = (0..200).map(|_| model.sample_initial(&mut rng)).collect();
        let la: Vec<f64> = draws
            .iter()
            .map(|x| model.observation_logdensity(x, &z[0]))
            .collect();
        let max = la.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = la.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for d in 0..3 {
            let mean: f64 = draws.iter().zip(&w).map(|(x, wi)| x[d] * wi).sum::<f64>() / total;
            assert!((run.estimates[0][d] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_run_tracks_true_state() {
        let model = LinearUniformModel::default().with_zero_noise();
        let traj = crate::model::simulate_trajectory(&model, 10, &mut substream(2, 0));
        let run = run_filter(&model, &traj.observations, 50, &mut substream(2, 1), false).unwrap();
        for (est, x) in run.estimates.iter().zip(&traj.states) {
            assert_eq!(est, x);
        }
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let model = StochVolModel::default();
        let traj = crate::model::simulate_trajectory(&model, 25, &mut substream(5, 0));
        let seed = SeedRecord::new(5, 1);
        let a = run_filter_seeded(&model, &traj.observations, 300, seed, true).unwrap();
        let b = run_filter_seeded(&model, &traj.observations, 300, seed, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.horizon(), 25);
        assert_eq!(a.resample_counts.len(), 25);
        assert!(a.log_alpha_bar_product().is_finite());
        assert!(a.resample_counts.iter().all(|r| r.total() == 300));
    }

    #[test]
    fn ancestry_reconstruction_follows_parents() {
        let model = DiscreteHmmModel::two_state();
        let z = vec![0, 1, 1, 0];
        let run = run_filter(&model, &z, 30, &mut substream(8, 1), true).unwrap();
        let hist = run.history.as_ref().unwrap();
        for i in 0..30 {
            let path = ancestor_indices(hist, i, 4);
            // the first-step ancestor is the ancestry origin of the final copy
            let final_origin = {
                let last = &hist[3];
                last.weighted.origins[last.parents[i]]
            };
            assert_eq!(path[0], final_origin);
        }
    }

    proptest! {
        #[test]
        fn normalization_and_hull(
            raw in proptest::collection::vec(-30.0f64..5.0, 1..60),
            values in proptest::collection::vec(-100.0f64..100.0, 60),
            shift in -50.0f64..50.0,
        ) {
            let m = raw.len();
            let cloud = scalar_cloud(&values[..m]);
            let a = cloud.clone().with_log_alpha(raw.clone()).unwrap();
            let total: f64 = a.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(a.weights.iter().all(|w| *w >= 0.0));

            let est = a.estimate(&Scalar).unwrap()[0];
            let lo = values[..m].iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values[..m].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9);

            // scaling every alpha by exp(shift) leaves weights and estimate alone
            let shifted: Vec<f64> = raw.iter().map(|l| l + shift).collect();
            let b = cloud.with_log_alpha(shifted).unwrap();
            for (x, y) in a.weights.iter().zip(&b.weights) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((b.estimate(&Scalar).unwrap()[0] - est).abs() < 1e-9);
            prop_assert!((b.log_alpha_bar - a.log_alpha_bar - shift).abs() < 1e-9);

            let (ra, _) = a.multinomial_resample(&mut substream(1, 1)).unwrap();
            let (rb, _) = b.multinomial_resample(&mut substream(1, 1)).unwrap();
            prop_assert_eq!(ra.parents, rb.parents);
        }
    }
}
