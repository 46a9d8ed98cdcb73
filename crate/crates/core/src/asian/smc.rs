use serde::{Deserialize, Serialize};

use super::mcmc::{sweep, AsianMoveStats, BirthDeathRatio};
use super::state::{AsianProblem, AsianState};
use crate::barrier::PotentialConfig;
use crate::error::{invalid, Result};
use crate::rng::StreamRng;
use crate::smc::{
    estimate_z, sir_run, smc_sampler_run, ParticleCloud, ResampleConfig, RunTrace, SamplerTargets, SequentialModel,
    ZEstimatorState,
};

/// Temperatures: `stage1.kappa(n)` along the path, then `stage2` on the full path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianTemperSchedule {
    pub stage1: PotentialConfig,
    pub stage2: Vec<f64>,
}

impl AsianTemperSchedule {
    /// `p` equal increments from `stage1.kappa(m)` to exactly 1.
    pub fn linear(stage1: PotentialConfig, m: usize, p: usize) -> Self {
        let k0 = stage1.kappa(m);
        let mut stage2: Vec<f64> = (1..=p).map(|k| k0 + (1.0 - k0) * k as f64 / p as f64).collect();
        if let Some(last) = stage2.last_mut() {
            *last = 1.0;
        }
        Self { stage1, stage2 }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        self.stage1.validate(m)?;
        let km = self.stage1.kappa(m);
        if !(km < 1.0) {
            return invalid(format!("path temperature {km} must stay below 1"));
        }
        let mut prev = km;
        for &k in &self.stage2 {
            if !(k > prev) {
                return invalid("sampler temperatures must increase strictly");
            }
            prev = k;
        }
        if self.stage2.last() != Some(&1.0) {
            return invalid("sampler temperatures must end at exactly 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianSmcConfig {
    pub n_particles: usize,
    pub schedule: AsianTemperSchedule,
    /// MCMC sweeps per sampler step.
    pub sweeps: usize,
    /// Resample when ESS falls below this fraction of `n_particles`.
    pub ess_fraction: f64,
    pub birth_death: BirthDeathRatio,
}

impl AsianSmcConfig {
    pub fn resample_config(&self) -> ResampleConfig {
        ResampleConfig::systematic(self.ess_fraction * self.n_particles as f64)
    }

    pub fn validate(&self, pb: &AsianProblem) -> Result<()> {
        pb.validate()?;
        self.schedule.validate(pb.m)?;
        if self.n_particles == 0 {
            return invalid("need at least one particle");
        }
        if !(0.0..=1.0).contains(&self.ess_fraction) {
            return invalid(format!("ESS fraction {} outside [0, 1]", self.ess_fraction));
        }
        Ok(())
    }
}

struct PathModel<'a> {
    pb: &'a AsianProblem,
    stage1: PotentialConfig,
}

impl SequentialModel for PathModel<'_> {
    type State = AsianState;

    fn sample_initial(&self, _rng: &mut StreamRng) -> AsianState {
        AsianState::initial(self.pb.params.s0, self.pb.m)
    }

    fn propose(&self, _step: usize, prev: &AsianState, rng: &mut StreamRng) -> AsianState {
        let mut x = prev.clone();
        x.extend(self.pb, rng);
        x
    }

    fn log_weight(&self, step: usize, prev: &AsianState, next: &AsianState, _rng: &mut StreamRng) -> f64 {
        let old = self.pb.log_potential(self.stage1.kappa(step - 1), prev);
        let new = self.pb.log_potential(self.stage1.kappa(step), next);
        if old == f64::NEG_INFINITY || new == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            new - old
        }
    }
}

/// Tempered SIR over the `m` periods with process proposals.
pub fn asian_stage1_sir(
    pb: &AsianProblem,
    cfg: &AsianSmcConfig,
    seed: u64,
) -> Result<(ParticleCloud<AsianState>, ZEstimatorState, RunTrace)> {
    cfg.validate(pb)?;
    let model = PathModel {
        pb,
        stage1: cfg.schedule.stage1,
    };
    let out = sir_run(&model, pb.m, cfg.n_particles, seed, &cfg.resample_config())?;
    Ok((out.cloud, out.z, out.trace))
}

struct Tempering<'a> {
    pb: &'a AsianProblem,
    kappas: Vec<f64>,
    sweeps: usize,
    convention: BirthDeathRatio,
}

impl SamplerTargets for Tempering<'_> {
    type State = AsianState;
    type MoveStats = AsianMoveStats;

    fn n_targets(&self) -> usize {
        self.kappas.len() - 1
    }

    fn log_target(&self, n: usize, x: &AsianState) -> f64 {
        super::state::asian_target_logdensity(x, self.kappas[n], self.pb)
    }

    fn log_incremental_weight(&self, n: usize, x: &AsianState) -> f64 {
        let dk = self.kappas[n] - self.kappas[n - 1];
        self.pb.log_potential(dk, x)
    }

    fn mutate(&self, n: usize, x: &mut AsianState, rng: &mut StreamRng) -> AsianMoveStats {
        sweep(x, self.kappas[n], self.pb, self.sweeps, self.convention, rng)
    }
}

/// SMC sampler raising the temperature of the full-path target along `stage2`.
/// `z` continues the estimate from stage 1.
pub fn asian_stage2_sampler(
    cloud: ParticleCloud<AsianState>,
    z: ZEstimatorState,
    pb: &AsianProblem,
    cfg: &AsianSmcConfig,
    seed: u64,
) -> Result<(ParticleCloud<AsianState>, ZEstimatorState, RunTrace, AsianMoveStats)> {
    cfg.validate(pb)?;
    let mut kappas = vec![cfg.schedule.stage1.kappa(pb.m)];
    kappas.extend_from_slice(&cfg.schedule.stage2);
    let targets = Tempering {
        pb,
        kappas,
        sweeps: cfg.sweeps,
        convention: cfg.birth_death,
    };
    let out = smc_sampler_run(&targets, cloud, z, seed, &cfg.resample_config())?;
    Ok((out.cloud, out.z, out.trace, out.stats))
}

/// `disc * Z * sum_i w_i 1{A_i > K}` for a cloud at temperature 1.
pub fn asian_price_estimate(cloud: &ParticleCloud<AsianState>, z_hat: f64, pb: &AsianProblem) -> Result<f64> {
    let itm = cloud.expectation(|x| (pb.partial_average(x) > pb.strike) as u8 as f64)?;
    Ok(pb.discount() * z_hat * itm)
}

/// `disc * Z * sum_i w_i (A_i - K)_+ / |A_i - K|^kappa` for a cloud at
/// temperature `kappa`, e.g. straight out of stage 1.
pub fn asian_tempered_estimate(
    cloud: &ParticleCloud<AsianState>,
    z_hat: f64,
    pb: &AsianProblem,
    kappa: f64,
) -> Result<f64> {
    let ratio = cloud.expectation(|x| {
        let d = pb.partial_average(x) - pb.strike;
        if d > 0.0 {
            d.powf(1.0 - kappa)
        } else {
            0.0
        }
    })?;
    Ok(pb.discount() * z_hat * ratio)
}

#[derive(Debug, Clone)]
pub struct AsianRun {
    pub price: f64,
    pub z_hat: f64,
    pub stage1: RunTrace,
    pub stage2: RunTrace,
    pub stats: AsianMoveStats,
    pub cloud: ParticleCloud<AsianState>,
}

impl AsianRun {
    pub fn final_ess(&self) -> f64 {
        self.stage2.final_ess()
    }

    pub fn resample_count(&self) -> usize {
        self.stage1.resample_count() + self.stage2.resample_count()
    }
}

/// Both stages and the price estimate. The two stages draw from disjoint
/// random streams of the same seed.
pub fn asian_smc_price(pb: &AsianProblem, cfg: &AsianSmcConfig, seed: u64) -> Result<AsianRun> {
    let (cloud, z, stage1) = asian_stage1_sir(pb, cfg, seed)?;
    let (cloud, z, stage2, stats) = asian_stage2_sampler(cloud, z, pb, cfg, seed)?;
    let z_hat = estimate_z(&z)?;
    let price = asian_price_estimate(&cloud, z_hat, pb)?;
    Ok(AsianRun {
        price,
        z_hat,
        stage1,
        stage2,
        stats,
        cloud,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BnsParams;

    fn default_stage1() -> PotentialConfig {
        PotentialConfig {
            intro_step: 6,
            kappa0: 0.2,
            kappa_step: 0.035,
        }
    }

    #[test]
    fn linear_schedule_shape() {
        let s = AsianTemperSchedule::linear(default_stage1(), 12, 20);
        assert!((s.stage1.kappa(12) - 0.41).abs() < 1e-12);
        assert_eq!(s.stage2.len(), 20);
        assert_eq!(*s.stage2.last().unwrap(), 1.0);
        s.validate(12).unwrap();
        let bad = AsianTemperSchedule {
            stage1: default_stage1(),
            stage2: vec![0.3, 1.0],
        };
        assert!(bad.validate(12).is_err());
    }

    #[test]
    fn zero_potential_gives_unit_weights() {
        let pb = AsianProblem {
            params: BnsParams::new(0.07, 1.0, 0.5, 1.0).unwrap(),
            strike: 0.9,
            m: 4,
            dt: 1.0,
            rate: 0.0,
        };
        let cfg = AsianSmcConfig {
            n_particles: 200,
            schedule: AsianTemperSchedule::linear(PotentialConfig::none(), 4, 3),
            sweeps: 1,
            ess_fraction: 0.5,
            birth_death: BirthDeathRatio::Corrected,
        };
        let (cloud, z, trace) = asian_stage1_sir(&pb, &cfg, 9).unwrap();
        assert!(cloud.log_weights.iter().all(|&w| w == 0.0));
        assert_eq!(estimate_z(&z).unwrap(), 1.0);
        assert_eq!(trace.resample_count(), 0);
        for x in &cloud.states {
            x.check(&pb).unwrap();
        }
    }

    #[test]
    fn all_out_of_money_prices_zero() {
        let pb = AsianProblem {
            params: BnsParams::new(0.07, 1.0, 0.5, 1.0).unwrap(),
            strike: 1e6,
            m: 2,
            dt: 1.0,
            rate: 0.0,
        };
        let mut rng = crate::rng::stream(1, 0, 0, crate::rng::Domain::Test);
        let states = (0..10).map(|_| AsianState::sample_path(&pb, 2, &mut rng)).collect();
        let cloud = ParticleCloud::uniform(states, 2);
        assert_eq!(asian_price_estimate(&cloud, 3.0, &pb).unwrap(), 0.0);
    }
}
