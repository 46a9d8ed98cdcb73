mod common;

use common::mean_se;
use rand::Rng;
use smcprice_core::barrier::BarrierSpec;
use smcprice_core::greeks::*;
use smcprice_core::models::*;
use smcprice_core::rng::{stream, Domain, StreamRng};
use smcprice_core::smc::{estimate_z, sir_run, ResampleConfig, SequentialModel};

/// Five-state chain with `P(j | i) ∝ exp(-(j - i/2 - theta)^2 / 2)`.
#[derive(Clone, Copy)]
struct Chain5 {
    theta: f64,
}

const STATES: usize = 5;
const CHAIN_M: usize = 3;

impl Chain5 {
    fn row(&self, i: u8) -> ([f64; STATES], [f64; STATES]) {
        let d: Vec<f64> = (0..STATES).map(|j| j as f64 - 0.5 * i as f64 - self.theta).collect();
        let e: Vec<f64> = d.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let total: f64 = e.iter().sum();
        let mut p = [0.0; STATES];
        for j in 0..STATES {
            p[j] = e[j] / total;
        }
        // d/dtheta of log e_j is d_j; of log total is the p-weighted mean of d.
        let dbar: f64 = (0..STATES).map(|j| p[j] * d[j]).sum();
        let mut dp = [0.0; STATES];
        for j in 0..STATES {
            dp[j] = p[j] * (d[j] - dbar);
        }
        (p, dp)
    }

    fn phi(n: usize, x: u8) -> f64 {
        if n == CHAIN_M {
            x as f64
        } else {
            1.0 + 0.2 * x as f64
        }
    }

    /// Exact `E[prod_n phi_n(X_n)]` by enumeration over all paths.
    fn exact_value(&self) -> f64 {
        let mut total = 0.0;
        for code in 0..STATES.pow(CHAIN_M as u32) {
            let mut prev = 2u8;
            let mut w = 1.0;
            let mut c = code;
            for n in 1..=CHAIN_M {
                let x = (c % STATES) as u8;
                c /= STATES;
                w *= self.row(prev).0[x as usize] * Self::phi(n, x);
                prev = x;
            }
            total += w;
        }
        total
    }
}

impl DifferentiableTransition for Chain5 {
    type State = u8;
    fn initial_state(&self) -> u8 {
        2
    }
    fn sample(&self, _n: usize, prev: &u8, rng: &mut StreamRng) -> u8 {
        let (p, _) = self.row(*prev);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                return j as u8;
            }
        }
        (STATES - 1) as u8
    }
    fn density_and_derivative(&self, _n: usize, next: &u8, prev: &u8) -> (f64, f64) {
        let (p, dp) = self.row(*prev);
        (p[*next as usize], dp[*next as usize])
    }
    fn potential(&self, n: usize, x: &u8) -> f64 {
        Self::phi(n, *x)
    }
}

/// Multiplies the derivative of the wrapped transition by `c`.
struct Scaled<T> {
    inner: T,
    c: f64,
}

impl<T: DifferentiableTransition> DifferentiableTransition for Scaled<T> {
    type State = T::State;
    fn initial_state(&self) -> T::State {
        self.inner.initial_state()
    }
    fn sample(&self, n: usize, prev: &T::State, rng: &mut StreamRng) -> T::State {
        self.inner.sample(n, prev, rng)
    }
    fn density_and_derivative(&self, n: usize, next: &T::State, prev: &T::State) -> (f64, f64) {
        let (p, dp) = self.inner.density_and_derivative(n, next, prev);
        (p, self.c * dp)
    }
    fn potential(&self, n: usize, x: &T::State) -> f64 {
        self.inner.potential(n, x)
    }
}

#[test]
fn chain_derivative_matches_enumeration() {
    let theta = 0.3;
    let h = 1e-5;
    let exact = (Chain5 { theta: theta + h }.exact_value() - Chain5 { theta: theta - h }.exact_value()) / (2.0 * h);
    let value = Chain5 { theta }.exact_value();
    let model = Chain5 { theta };
    let mut d = Vec::new();
    let mut v = Vec::new();
    for r in 0..60 {
        let run = greek_recursion_run(&model, CHAIN_M, 1000, 40 + r, TermOrder::default()).unwrap();
        d.push(run.sensitivity);
        v.push(run.value);
    }
    let (dm, dse) = mean_se(&d);
    let (vm, vse) = mean_se(&v);
    assert!((dm - exact).abs() < 3.0 * dse, "{dm} +- {dse} vs {exact}");
    assert!((vm - value).abs() < 3.0 * vse, "{vm} +- {vse} vs {value}");
}

#[test]
fn term_order_does_not_change_a_bit() {
    let model = Chain5 { theta: -0.4 };
    let a = greek_recursion_run(&model, CHAIN_M, 500, 9, TermOrder::TransitionFirst).unwrap();
    let b = greek_recursion_run(&model, CHAIN_M, 500, 9, TermOrder::DerivativeFirst).unwrap();
    assert_eq!(a.sensitivity.to_bits(), b.sensitivity.to_bits());
    assert_eq!(a.cloud.lambda_weights, b.cloud.lambda_weights);
}

#[test]
fn estimate_is_linear_in_the_derivative() {
    let base = greek_recursion_run(&Chain5 { theta: 0.1 }, CHAIN_M, 400, 3, TermOrder::default()).unwrap();
    for c in [2.0, -0.5, 0.0] {
        let run = greek_recursion_run(
            &Scaled {
                inner: Chain5 { theta: 0.1 },
                c,
            },
            CHAIN_M,
            400,
            3,
            TermOrder::default(),
        )
        .unwrap();
        assert_eq!(run.sensitivity, c * base.sensitivity, "c = {c}");
        assert_eq!(run.value, base.value);
    }
    let zero = greek_recursion_run(
        &Scaled {
            inner: Chain5 { theta: 0.1 },
            c: 0.0,
        },
        CHAIN_M,
        400,
        3,
        TermOrder::default(),
    )
    .unwrap();
    assert_eq!(zero.sensitivity, 0.0);
}

fn table_spec(m: usize) -> BarrierSpec {
    BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::above(5.0), m, 0.5).unwrap()
}

fn gbm() -> GbmParams {
    GbmParams::new(0.01, 0.75, 10.0).unwrap()
}

#[test]
fn vanilla_delta_matches_closed_form() {
    let spec = BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::above(0.0), 1, 0.5).unwrap();
    let t = GbmBarrierTransition::new(spec, gbm(), GreekParam::Spot).unwrap();
    let n = 100_000;
    let run = greek_recursion_run(&t, 1, n, 21, TermOrder::default()).unwrap();
    let contributions: Vec<f64> = run.cloud.lambda_weights.iter().map(|w| w * n as f64).collect();
    let (mean, se) = mean_se(&contributions);
    let exact = black_scholes_call_delta(10.0, 10.0, 0.01, 0.75, 0.5);
    assert!((mean - run.sensitivity).abs() < 1e-12);
    assert!((mean - exact).abs() < 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let mut rng = stream(8, 0, 0, Domain::Test);
    for param in [GreekParam::Spot, GreekParam::Vol] {
        let t = GbmBarrierTransition::new(table_spec(25), gbm(), param).unwrap();
        let theta = t.theta_value();
        let h = 1e-5 * theta;
        let (up, down) = (t.with_theta(theta + h), t.with_theta(theta - h));
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let n = if param == GreekParam::Spot {
                1
            } else {
                rng.random_range(1..=25)
            };
            let prev = if n == 1 {
                t.initial_state()
            } else {
                GbmPoint::new(rng.random_range(3.0..30.0))
            };
            let z: f64 = rng.random_range(-3.0..3.0);
            let next = GbmPoint::new(prev.s * (0.75 * 0.5f64.sqrt() * z).exp());
            let (p, dp) = t.density_and_derivative(n, &next, &prev);
            let prev_up = if n == 1 { up.initial_state() } else { prev };
            let prev_down = if n == 1 { down.initial_state() } else { prev };
            let fd = (up.density_and_derivative(n, &next, &prev_up).0
                - down.density_and_derivative(n, &next, &prev_down).0)
                / (2.0 * h);
            // Relative to the derivative, floored at 1e-3 of the density scale p / theta.
            let err = (dp - fd).abs() / fd.abs().max(1e-3 * p / theta);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "{param:?}: {worst}");
    }
}

/// Bootstrap filter whose normalizing constant is the survival probability.
struct Survival {
    spec: BarrierSpec,
    p: GbmParams,
}

impl SequentialModel for Survival {
    type State = f64;
    fn sample_initial(&self, _rng: &mut StreamRng) -> f64 {
        self.p.s0
    }
    fn propose(&self, n: usize, prev: &f64, rng: &mut StreamRng) -> f64 {
        gbm_sample(*prev, self.spec.dt(n), &self.p, rng)
    }
    fn log_weight(&self, n: usize, _prev: &f64, next: &f64, _rng: &mut StreamRng) -> f64 {
        if self.spec.intervals[n - 1].contains(*next) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Barrier transitions with the indicator as the only potential.
struct IndicatorOnly(GbmBarrierTransition);

impl DifferentiableTransition for IndicatorOnly {
    type State = GbmPoint;
    fn initial_state(&self) -> GbmPoint {
        self.0.initial_state()
    }
    fn sample(&self, n: usize, prev: &GbmPoint, rng: &mut StreamRng) -> GbmPoint {
        self.0.sample(n, prev, rng)
    }
    fn density_and_derivative(&self, n: usize, next: &GbmPoint, prev: &GbmPoint) -> (f64, f64) {
        self.0.density_and_derivative(n, next, prev)
    }
    fn potential(&self, n: usize, x: &GbmPoint) -> f64 {
        self.0.spec.intervals[n - 1].contains(x.s) as u8 as f64
    }
}

#[test]
fn marginal_value_matches_sir_normalizing_constant() {
    let m = 6;
    let spec = BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::new(6.0, 16.0).unwrap(), m, 0.5).unwrap();
    let greek = IndicatorOnly(GbmBarrierTransition::new(spec.clone(), gbm(), GreekParam::Vol).unwrap());
    let boot = Survival { spec, p: gbm() };
    let n = 2000;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in 0..30 {
        a.push(
            greek_recursion_run(&greek, m, n, 500 + r, TermOrder::default())
                .unwrap()
                .value,
        );
        let out = sir_run(&boot, m, n, 600 + r, &ResampleConfig::half(n)).unwrap();
        b.push(estimate_z(&out.z).unwrap());
    }
    let (ma, sa) = mean_se(&a);
    let (mb, sb) = mean_se(&b);
    assert!(
        (ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(),
        "{ma} +- {sa} vs {mb} +- {sb}"
    );
}

#[test]
fn finite_difference_oracle_properties() {
    // Black–Scholes price in s0: central difference converges at O(h^2).
    let exact = black_scholes_call_delta(10.0, 10.0, 0.01, 0.75, 0.5);
    let f = |s: f64| Ok(black_scholes_call(s, 10.0, 0.01, 0.75, 0.5));
    let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|rel| (finite_difference_greek(f, 10.0, rel * 10.0).unwrap() - exact).abs())
        .collect();
    // Richardson: each tenfold reduction in h cuts the error about a hundredfold.
    for w in errs.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.008..0.012).contains(&ratio), "{errs:?}");
    }
    assert!(errs[2] < 1e-6, "{errs:?}");
}
