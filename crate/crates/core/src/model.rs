//! Analytic energy model of a single EEE link.
//!
//! A link alternates between busy periods, a sleep transition of length `Ts`,
//! a low-power idle sojourn of mean `T_off` and a wake transition of length
//! `Tw`. With `ρ` the normalized load and `σ_off` the relative idle power the
//! normalized energy is
//!
//! ```text
//! E(ρ) = 1 − (1 − σ_off)(1 − ρ) · T_off(ρ) / (T_off(ρ) + Ts + Tw)
//! ```
//!
//! `T_off` depends on the governor and the arrival process. The closed forms
//! implemented here are listed in [`ToffCurve`].

use thiserror::Error;

use crate::gamma::{gamma_q, GammaError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("T_off is undefined at zero load")]
    ZeroLoad,
    #[error("load {0} outside [0, 1]")]
    LoadOutOfRange(f64),
    #[error("operation requires the burst governor")]
    NotBurst,
    #[error("analytic derivatives are not available for this curve")]
    NoAnalyticDerivatives,
    #[error("finite difference at x = {x} with step {step} leaves the domain (0, 1)")]
    NearDomainEdge { x: f64, step: f64 },
    #[error("rate {rate} on link {link} outside [0, {capacity}]")]
    RateOutOfRange { link: usize, rate: f64, capacity: f64 },
    #[error("rate vector has {rates} entries for {links} links")]
    LengthMismatch { rates: usize, links: usize },
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn f64_of<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Capacity and EEE hardware constants of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams<T> {
    /// Line rate `C` in bits/second.
    pub capacity_bps: T,
    /// Sleep transition time `Ts` in seconds.
    pub ts: T,
    /// Wake transition time `Tw` in seconds.
    pub tw: T,
    /// Idle power relative to active power, `σ_off ∈ [0, 1)`.
    pub sigma_off: T,
}

impl<T: Scalar> LinkParams<T> {
    pub fn new(capacity_bps: T, ts: T, tw: T, sigma_off: T) -> Result<Self, ModelError> {
        let p = Self {
            capacity_bps,
            ts,
            tw,
            sigma_off,
        };
        p.validate()?;
        Ok(p)
    }

    /// 10GBASE-T: 10 Gb/s, `Ts` = 2.88 µs, `Tw` = 4.48 µs, `σ_off` = 0.1.
    pub fn ten_gbase_t() -> Self {
        Self {
            capacity_bps: T::lit(10e9),
            ts: T::lit(2.88e-6),
            tw: T::lit(4.48e-6),
            sigma_off: T::lit(0.1),
        }
    }

    pub fn with_capacity(mut self, capacity_bps: T) -> Self {
        self.capacity_bps = capacity_bps;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.capacity_bps > T::zero()) || !self.capacity_bps.is_finite() {
            return Err(invalid("capacity_bps", "must be positive and finite"));
        }
        if !(self.ts > T::zero()) || !self.ts.is_finite() {
            return Err(invalid("ts", "must be positive and finite"));
        }
        if !(self.tw > T::zero()) || !self.tw.is_finite() {
            return Err(invalid("tw", "must be positive and finite"));
        }
        if !(self.sigma_off >= T::zero() && self.sigma_off < T::one()) {
            return Err(invalid("sigma_off", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Total transition overhead `b = Ts + Tw`.
    pub fn transition_time(&self) -> T {
        self.ts + self.tw
    }

    /// Fraction of power saved while idle, `a = 1 − σ_off`.
    pub fn saving_depth(&self) -> T {
        T::one() - self.sigma_off
    }

    /// Frames per second the link can serve for a fixed frame size, `µ = C / (8·size)`.
    pub fn service_rate(&self, pkt_bytes: T) -> T {
        self.capacity_bps / (T::lit(8.0) * pkt_bytes)
    }
}

/// Sleep governor deciding when an idle link wakes up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GovernorSpec<T> {
    /// Wake on the first arrival.
    Frame,
    /// Wake on the `qw`-th queued frame or `tmax` seconds after the first one.
    Burst { qw: u32, tmax: T },
}

impl<T: Scalar> GovernorSpec<T> {
    pub fn burst(qw: u32, tmax: T) -> Result<Self, ModelError> {
        let g = GovernorSpec::Burst { qw, tmax };
        g.validate()?;
        Ok(g)
    }

    /// Coalescing profile used in the 10GBASE-T experiments: 20 frames, 100 µs.
    pub fn default_burst() -> Self {
        GovernorSpec::Burst {
            qw: 20,
            tmax: T::lit(100e-6),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            GovernorSpec::Frame => Ok(()),
            GovernorSpec::Burst { qw, tmax } => {
                if qw < 1 {
                    return Err(invalid("qw", "burst size must be at least one frame"));
                }
                if !(tmax > T::zero()) {
                    return Err(invalid("tmax", "coalescing timer must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn is_burst(&self) -> bool {
        matches!(self, GovernorSpec::Burst { .. })
    }
}

/// Arrival model used to pick between exact Poisson forms and general approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    PoissonExact,
    GeneralApprox,
}

/// Traffic offered to one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSpec<T> {
    /// `µ`, reciprocal of the mean frame transmission time (frames/second).
    pub mean_service_rate: T,
    /// `ρ = x / C`.
    pub load: T,
    pub distribution: Distribution,
}

impl<T: Scalar> TrafficSpec<T> {
    pub fn new(mean_service_rate: T, load: T, distribution: Distribution) -> Result<Self, ModelError> {
        if !(mean_service_rate > T::zero()) || !mean_service_rate.is_finite() {
            return Err(invalid("mean_service_rate", "must be positive and finite"));
        }
        if !(load >= T::zero() && load <= T::one()) {
            return Err(ModelError::LoadOutOfRange(f64_of(load)));
        }
        Ok(Self {
            mean_service_rate,
            load,
            distribution,
        })
    }

    pub fn with_load(mut self, load: T) -> Self {
        self.load = load;
        self
    }

    fn arrival_rate(&self) -> Result<T, ModelError> {
        if self.load == T::zero() {
            return Err(ModelError::ZeroLoad);
        }
        if !(self.load > T::zero() && self.load <= T::one()) {
            return Err(ModelError::LoadOutOfRange(f64_of(self.load)));
        }
        Ok(self.mean_service_rate * self.load)
    }
}

/// Closed forms for `T_off(ρ)`. `λ = µρ` is the frame arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToffCurve {
    /// Frame governor, Poisson arrivals: `e^{−λ Ts} / λ`.
    FramePoisson,
    /// Frame governor, any arrivals: `(1/λ − Ts)⁺`.
    FrameApprox,
    /// Burst governor below `ρ*`: `1/λ + Tmax − Ts` (exact for Poisson).
    BurstLow,
    /// Burst governor above `ρ*`, any arrivals: `(Qw/λ − Ts)⁺`.
    BurstHighApprox,
    /// Burst governor above `ρ*`, Poisson arrivals:
    /// `[Γ(Qw+1, λTs) − λTs·Γ(Qw, λTs)] / (λ Γ(Qw))`.
    BurstHighPoisson,
}

impl ToffCurve {
    pub const ALL: [ToffCurve; 5] = [
        ToffCurve::FramePoisson,
        ToffCurve::FrameApprox,
        ToffCurve::BurstLow,
        ToffCurve::BurstHighApprox,
        ToffCurve::BurstHighPoisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToffCurve::FramePoisson => "frame-poisson",
            ToffCurve::FrameApprox => "frame-approx",
            ToffCurve::BurstLow => "burst-low",
            ToffCurve::BurstHighApprox => "burst-high-approx",
            ToffCurve::BurstHighPoisson => "burst-high-poisson",
        }
    }

    /// Short regime tag used in CSV output.
    pub fn regime(self) -> &'static str {
        match self {
            ToffCurve::FramePoisson | ToffCurve::FrameApprox => "frame",
            ToffCurve::BurstLow => "low",
            ToffCurve::BurstHighApprox | ToffCurve::BurstHighPoisson => "high",
        }
    }

    pub fn needs_burst(self) -> bool {
        !matches!(self, ToffCurve::FramePoisson | ToffCurve::FrameApprox)
    }
}

fn burst_params<T: Scalar>(gov: &GovernorSpec<T>) -> Result<(u32, T), ModelError> {
    match *gov {
        GovernorSpec::Burst { qw, tmax } => {
            if qw < 1 {
                return Err(invalid("qw", "burst size must be at least one frame"));
            }
            if !(tmax >= T::zero()) {
                return Err(invalid("tmax", "coalescing timer must be non-negative"));
            }
            Ok((qw, tmax))
        }
        GovernorSpec::Frame => Err(ModelError::NotBurst),
    }
}

/// Mean idle sojourn under the frame governor.
pub fn toff_frame<T: Scalar>(spec: &TrafficSpec<T>, params: &LinkParams<T>) -> Result<T, ModelError> {
    let lambda = spec.arrival_rate()?;
    Ok(match spec.distribution {
        Distribution::PoissonExact => (-lambda * params.ts).exp() / lambda,
        Distribution::GeneralApprox => (lambda.recip() - params.ts).max(T::zero()),
    })
}

/// Mean idle sojourn of the burst governor when wake-ups are timer driven.
///
/// The same expression is exact for Poisson arrivals, so `distribution` is ignored.
pub fn toff_burst_low<T: Scalar>(
    spec: &TrafficSpec<T>,
    gov: &GovernorSpec<T>,
    params: &LinkParams<T>,
) -> Result<T, ModelError> {
    let (_, tmax) = burst_params(gov)?;
    let lambda = spec.arrival_rate()?;
    Ok((lambda.recip() + tmax - params.ts).max(T::zero()))
}

/// Mean idle sojourn of the burst governor when wake-ups are count driven.
pub fn toff_burst_high<T: Scalar>(
    spec: &TrafficSpec<T>,
    gov: &GovernorSpec<T>,
    params: &LinkParams<T>,
) -> Result<T, ModelError> {
    let (qw, _) = burst_params(gov)?;
    let lambda = spec.arrival_rate()?;
    let n = T::from_u32(qw).unwrap();
    match spec.distribution {
        Distribution::GeneralApprox => Ok((n / lambda - params.ts).max(T::zero())),
        Distribution::PoissonExact => {
            let y = lambda * params.ts;
            // Γ(n+1, y) / Γ(n) = n·Q(n+1, y) and Γ(n, y) / Γ(n) = Q(n, y)
            let num = n * gamma_q(n + T::one(), y)? - y * gamma_q(n, y)?;
            Ok((num / lambda).max(T::zero()))
        }
    }
}

/// Load threshold `ρ* = (Qw − 1) / (µ·Tmax)` separating the burst regimes, clamped to `[0, 1]`.
pub fn rho_star<T: Scalar>(gov: &GovernorSpec<T>, spec: &TrafficSpec<T>) -> Result<T, ModelError> {
    let (qw, tmax) = burst_params(gov)?;
    let num = T::from_u32(qw - 1).unwrap();
    if num == T::zero() {
        return Ok(T::zero());
    }
    let r = num / (spec.mean_service_rate * tmax);
    if r.is_nan() {
        return Ok(T::one());
    }
    Ok(r.max(T::zero()).min(T::one()))
}

/// Closed form that applies to `spec` under `gov`. Burst loads strictly below `ρ*` use the low regime.
pub fn select_curve<T: Scalar>(spec: &TrafficSpec<T>, gov: &GovernorSpec<T>) -> Result<ToffCurve, ModelError> {
    Ok(match gov {
        GovernorSpec::Frame => match spec.distribution {
            Distribution::PoissonExact => ToffCurve::FramePoisson,
            Distribution::GeneralApprox => ToffCurve::FrameApprox,
        },
        GovernorSpec::Burst { .. } => {
            if spec.load < rho_star(gov, spec)? {
                ToffCurve::BurstLow
            } else {
                match spec.distribution {
                    Distribution::PoissonExact => ToffCurve::BurstHighPoisson,
                    Distribution::GeneralApprox => ToffCurve::BurstHighApprox,
                }
            }
        }
    })
}

/// Evaluate a specific closed form, regardless of which regime `spec` falls in.
pub fn toff_curve<T: Scalar>(
    curve: ToffCurve,
    spec: &TrafficSpec<T>,
    gov: &GovernorSpec<T>,
    params: &LinkParams<T>,
) -> Result<T, ModelError> {
    let spec = TrafficSpec {
        distribution: match curve {
            ToffCurve::FramePoisson | ToffCurve::BurstHighPoisson => Distribution::PoissonExact,
            _ => Distribution::GeneralApprox,
        },
        ..*spec
    };
    match curve {
        ToffCurve::FramePoisson | ToffCurve::FrameApprox => toff_frame(&spec, params),
        ToffCurve::BurstLow => toff_burst_low(&spec, gov, params),
        ToffCurve::BurstHighApprox | ToffCurve::BurstHighPoisson => toff_burst_high(&spec, gov, params),
    }
}

/// Regime dispatcher: frame, burst-low if `ρ < ρ*`, burst-high otherwise.
pub fn toff<T: Scalar>(spec: &TrafficSpec<T>, gov: &GovernorSpec<T>, params: &LinkParams<T>) -> Result<T, ModelError> {
    spec.arrival_rate()?;
    match select_curve(spec, gov)? {
        ToffCurve::FramePoisson | ToffCurve::FrameApprox => toff_frame(spec, params),
        ToffCurve::BurstLow => toff_burst_low(spec, gov, params),
        ToffCurve::BurstHighApprox | ToffCurve::BurstHighPoisson => toff_burst_high(spec, gov, params),
    }
}

/// Idle fraction of a sleep cycle, `h = T_off / (T_off + Ts + Tw)`.
pub fn idle_ratio<T: Scalar>(toff: T, params: &LinkParams<T>) -> T {
    toff / (toff + params.transition_time())
}

fn energy_from_toff<T: Scalar>(load: T, toff: T, params: &LinkParams<T>) -> T {
    T::one() - params.saving_depth() * (T::one() - load) * idle_ratio(toff, params)
}

/// Normalized energy `E(ρ) ∈ [σ_off, 1]` of one link.
///
/// At `ρ = 0` every `T_off` form diverges and the limit `σ_off` is returned.
pub fn link_energy<T: Scalar>(spec: &TrafficSpec<T>, gov: &GovernorSpec<T>, params: &LinkParams<T>) -> Result<T, ModelError> {
    if !(spec.load >= T::zero() && spec.load <= T::one()) {
        return Err(ModelError::LoadOutOfRange(f64_of(spec.load)));
    }
    if spec.load == T::zero() {
        return Ok(params.sigma_off);
    }
    if spec.load == T::one() {
        return Ok(T::one());
    }
    let t = toff(spec, gov, params)?;
    if t.is_infinite() {
        return Ok(params.sigma_off);
    }
    Ok(energy_from_toff(spec.load, t, params))
}

/// Energy of a single link evaluated on one fixed closed form.
pub fn link_energy_on_curve<T: Scalar>(
    curve: ToffCurve,
    spec: &TrafficSpec<T>,
    gov: &GovernorSpec<T>,
    params: &LinkParams<T>,
) -> Result<T, ModelError> {
    if spec.load == T::zero() {
        return Ok(params.sigma_off);
    }
    if spec.load == T::one() {
        return Ok(T::one());
    }
    let t = toff_curve(curve, spec, gov, params)?;
    Ok(energy_from_toff(spec.load, t, params))
}

/// Bundle energy `E_B = Σ E(x_i)` for per-link rates in bits/second.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleEnergy<T> {
    pub per_link: Vec<T>,
    /// `Σ E(x_i)`, between `N·σ_off` and `N`.
    pub raw: T,
    /// `raw / N`.
    pub normalized: T,
}

/// Evaluate `E_B` with `µ_i = C_i / (8·pkt_bytes)` on every link.
pub fn bundle_energy<T: Scalar>(
    rates: &[T],
    links: &[LinkParams<T>],
    gov: &GovernorSpec<T>,
    distribution: Distribution,
    pkt_bytes: T,
) -> Result<BundleEnergy<T>, ModelError> {
    if rates.len() != links.len() {
        return Err(ModelError::LengthMismatch {
            rates: rates.len(),
            links: links.len(),
        });
    }
    let mut per_link = Vec::with_capacity(rates.len());
    for (i, (&x, link)) in rates.iter().zip(links).enumerate() {
        if !(x >= T::zero() && x <= link.capacity_bps) {
            return Err(ModelError::RateOutOfRange {
                link: i,
                rate: f64_of(x),
                capacity: f64_of(link.capacity_bps),
            });
        }
        let spec = TrafficSpec {
            mean_service_rate: link.service_rate(pkt_bytes),
            load: x / link.capacity_bps,
            distribution,
        };
        per_link.push(link_energy(&spec, gov, link)?);
    }
    let raw = per_link.iter().fold(T::zero(), |acc, &e| acc + e);
    let n = T::from_usize(per_link.len().max(1)).unwrap();
    Ok(BundleEnergy {
        per_link,
        raw,
        normalized: raw / n,
    })
}

/// A scalar function of the load with optional analytic first and second derivatives.
pub trait SmoothCurve<T> {
    fn value(&self, x: T) -> T;

    /// `[f′(x), f″(x)]` when known in closed form.
    fn derivatives(&self, _x: T) -> Option<[T; 2]> {
        None
    }
}

impl<T, F> SmoothCurve<T> for F
where
    F: Fn(T) -> T,
{
    fn value(&self, x: T) -> T {
        self(x)
    }
}

/// How [`concavity_margin`] obtains `f′` and `f″`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivatives<T> {
    Analytic,
    CentralDifference { step: T },
}

/// Default finite-difference step in load units.
pub const FD_STEP: f64 = 1e-4;

impl<T: Scalar> Derivatives<T> {
    pub fn central() -> Self {
        Derivatives::CentralDifference { step: T::lit(FD_STEP) }
    }
}

fn check_fd_domain<T: Scalar>(x: T, step: T) -> Result<(), ModelError> {
    let two_h = step + step;
    if !(step > T::zero()) || x < two_h || x > T::one() - two_h {
        return Err(ModelError::NearDomainEdge {
            x: f64_of(x),
            step: f64_of(step),
        });
    }
    Ok(())
}

fn central_derivatives<T: Scalar, F: SmoothCurve<T> + ?Sized>(f: &F, x: T, h: T) -> [T; 3] {
    let two = T::lit(2.0);
    let (fm, f0, fp) = (f.value(x - h), f.value(x), f.value(x + h));
    [f0, (fp - fm) / (two * h), (fp - two * f0 + fm) / (h * h)]
}

/// `f″(x)(f(x) + b) − 2 f′(x)²`. A positive value certifies that
/// `1 − a(1 − x) f/(f + b)` is concave at `x` for any `a > 0`.
pub fn concavity_margin<T: Scalar, F: SmoothCurve<T> + ?Sized>(
    f: &F,
    b: T,
    x: T,
    method: Derivatives<T>,
) -> Result<T, ModelError> {
    let [v, d1, d2] = match method {
        Derivatives::Analytic => {
            let [d1, d2] = f.derivatives(x).ok_or(ModelError::NoAnalyticDerivatives)?;
            [f.value(x), d1, d2]
        }
        Derivatives::CentralDifference { step } => {
            check_fd_domain(x, step)?;
            central_derivatives(f, x, step)
        }
    };
    Ok(d2 * (v + b) - T::lit(2.0) * d1 * d1)
}

/// One `T_off` closed form bound to a link, frame size and governor, as a function of `ρ`.
///
/// [`SmoothCurve::value`] evaluates the smooth branch, without the `(·)⁺`
/// clamp of the approximate forms; the clamped value is [`SojournCurve::toff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SojournCurve<T> {
    pub curve: ToffCurve,
    pub mu: T,
    pub ts: T,
    pub tmax: T,
    pub qw: u32,
}

impl<T: Scalar> SojournCurve<T> {
    pub fn new(curve: ToffCurve, params: &LinkParams<T>, gov: &GovernorSpec<T>, pkt_bytes: T) -> Result<Self, ModelError> {
        let (qw, tmax) = match *gov {
            GovernorSpec::Burst { qw, tmax } => (qw, tmax),
            GovernorSpec::Frame if curve.needs_burst() => return Err(ModelError::NotBurst),
            GovernorSpec::Frame => (1, T::zero()),
        };
        Ok(Self {
            curve,
            mu: params.service_rate(pkt_bytes),
            ts: params.ts,
            tmax,
            qw,
        })
    }

    fn governor(&self) -> GovernorSpec<T> {
        GovernorSpec::Burst {
            qw: self.qw,
            tmax: self.tmax,
        }
    }

    /// `T_off(ρ)` as the model uses it (approximations clamped at zero).
    pub fn toff(&self, rho: T) -> Result<T, ModelError> {
        let params = LinkParams {
            capacity_bps: T::one(),
            ts: self.ts,
            tw: T::one(),
            sigma_off: T::zero(),
        };
        let spec = TrafficSpec {
            mean_service_rate: self.mu,
            load: rho,
            distribution: Distribution::GeneralApprox,
        };
        toff_curve(self.curve, &spec, &self.governor(), &params)
    }

    // f(ρ) = A/(µρ) + B for the approximate forms
    fn hyperbolic(&self) -> Option<(T, T)> {
        match self.curve {
            ToffCurve::FrameApprox => Some((T::one(), -self.ts)),
            ToffCurve::BurstLow => Some((T::one(), self.tmax - self.ts)),
            ToffCurve::BurstHighApprox => Some((T::from_u32(self.qw).unwrap(), -self.ts)),
            _ => None,
        }
    }

    // Poisson forms, written with y = µ Ts ρ and n = Qw (n = 1 for frame):
    //   f = Ts · N(y) / y,  N(y) = n Q(n+1, y) − y Q(n, y)
    //   N′ = −Q(n, y),  N″ = g_n(y) = y^{n−1} e^{−y} / Γ(n)
    fn poisson_terms(&self, rho: T) -> (T, T, T, T) {
        let n = if self.curve == ToffCurve::FramePoisson { 1 } else { self.qw };
        let y = self.mu * self.ts * rho;
        if n == 1 {
            let e = (-y).exp();
            return (y, e, e, e);
        }
        let nt = T::from_u32(n).unwrap();
        let q_n = gamma_q(nt, y).unwrap_or_else(|_| T::nan());
        let q_n1 = gamma_q(nt + T::one(), y).unwrap_or_else(|_| T::nan());
        let big_n = nt * q_n1 - y * q_n;
        let g = ((nt - T::one()) * y.ln() - y - crate::gamma::ln_gamma(nt)).exp();
        (y, big_n, q_n, g)
    }
}

impl<T: Scalar> SmoothCurve<T> for SojournCurve<T> {
    fn value(&self, rho: T) -> T {
        if let Some((a, b)) = self.hyperbolic() {
            return a / (self.mu * rho) + b;
        }
        let (y, big_n, _, _) = self.poisson_terms(rho);
        self.ts * big_n / y
    }

    fn derivatives(&self, rho: T) -> Option<[T; 2]> {
        let two = T::lit(2.0);
        if let Some((a, _)) = self.hyperbolic() {
            let d1 = -a / (self.mu * rho * rho);
            let d2 = two * a / (self.mu * rho * rho * rho);
            return Some([d1, d2]);
        }
        let (y, big_n, q_n, g) = self.poisson_terms(rho);
        let k = self.mu * self.ts;
        let f1 = -q_n / y - big_n / (y * y);
        let f2 = g / y + two * q_n / (y * y) + two * big_n / (y * y * y);
        Some([self.ts * k * f1, self.ts * k * k * f2])
    }
}

/// `h(ρ) = T_off / (T_off + Ts + Tw)` on one closed form.
pub fn idle_ratio_on_curve<T: Scalar>(curve: &SojournCurve<T>, params: &LinkParams<T>, rho: T) -> Result<T, ModelError> {
    Ok(idle_ratio(curve.toff(rho)?, params))
}

/// Central-difference `h″(ρ)` for every `(pkt_size, load)` pair; rows follow `pkt_sizes`.
pub fn energy_second_derivative_grid<T: Scalar>(
    curve: ToffCurve,
    gov: &GovernorSpec<T>,
    params: &LinkParams<T>,
    pkt_sizes: &[T],
    loads: &[T],
) -> Result<Vec<Vec<T>>, ModelError> {
    let step = T::lit(FD_STEP);
    let (min_pkt, max_pkt) = (T::lit(64.0), T::lit(9000.0));
    let mut out = Vec::with_capacity(pkt_sizes.len());
    for &pkt in pkt_sizes {
        if !(pkt >= min_pkt && pkt <= max_pkt) {
            return Err(invalid("pkt_size", format!("{} outside [64, 9000] bytes", f64_of(pkt))));
        }
        let sc = SojournCurve::new(curve, params, gov, pkt)?;
        let mut row = Vec::with_capacity(loads.len());
        for &rho in loads {
            check_fd_domain(rho, step)?;
            let h = |r: T| idle_ratio_on_curve(&sc, params, r);
            let (hm, h0, hp) = (h(rho - step)?, h(rho)?, h(rho + step)?);
            row.push((hp - T::lit(2.0) * h0 + hm) / (step * step));
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MU: f64 = 1.25e6;

    fn hw() -> LinkParams<f64> {
        LinkParams::ten_gbase_t()
    }

    fn spec(load: f64, d: Distribution) -> TrafficSpec<f64> {
        TrafficSpec::new(MU, load, d).unwrap()
    }

    fn burst() -> GovernorSpec<f64> {
        GovernorSpec::default_burst()
    }

    #[test]
    fn frame_poisson_closed_form() {
        // e^{-1.8} / 6.25e5, evaluated independently at 30 digits
        let t = toff_frame(&spec(0.5, Distribution::PoissonExact), &hw()).unwrap();
        assert_relative_eq!(t, 2.644_782_211_545_384_5e-7, max_relative = 1e-12);
    }

    #[test]
    fn frame_approx_examples() {
        let t = toff_frame(&spec(0.1, Distribution::GeneralApprox), &hw()).unwrap();
        assert_relative_eq!(t, 5.12e-6, max_relative = 1e-12);
        for rho in [1.0 / (MU * 2.88e-6), 0.3, 0.9] {
            assert_eq!(toff_frame(&spec(rho, Distribution::GeneralApprox), &hw()).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_load_is_a_domain_error() {
        let s = spec(0.0, Distribution::PoissonExact);
        assert_eq!(toff_frame(&s, &hw()), Err(ModelError::ZeroLoad));
        assert_eq!(toff_burst_low(&s, &burst(), &hw()), Err(ModelError::ZeroLoad));
        assert_eq!(toff_burst_high(&s, &burst(), &hw()), Err(ModelError::ZeroLoad));
        assert_eq!(toff(&s, &GovernorSpec::Frame, &hw()), Err(ModelError::ZeroLoad));
    }

    #[test]
    fn burst_low_examples() {
        let s = spec(0.1, Distribution::GeneralApprox);
        let t = toff_burst_low(&s, &burst(), &hw()).unwrap();
        assert_relative_eq!(t, 1.0512e-4, max_relative = 1e-12);
        let frame = toff_frame(&s, &hw()).unwrap();
        assert_relative_eq!(t, frame + 100e-6, max_relative = 1e-12);

        let degenerate = GovernorSpec::Burst { qw: 20, tmax: 0.0 };
        for rho in [0.05, 0.1, 0.2, 0.5] {
            let s = spec(rho, Distribution::GeneralApprox);
            assert_relative_eq!(
                toff_burst_low(&s, &degenerate, &hw()).unwrap(),
                toff_frame(&s, &hw()).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn burst_low_is_positive_up_to_threshold() {
        let rs = rho_star(&burst(), &spec(0.1, Distribution::PoissonExact)).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let rho = rs * i as f64 / 100.0 - 1e-12;
            let t = toff_burst_low(&spec(rho, Distribution::PoissonExact), &burst(), &hw()).unwrap();
            assert!(t > 0.0 && t < prev);
            prev = t;
        }
    }

    #[test]
    fn burst_high_approx_example() {
        let t = toff_burst_high(&spec(0.5, Distribution::GeneralApprox), &burst(), &hw()).unwrap();
        assert_relative_eq!(t, 2.912e-5, max_relative = 1e-12);
    }

    #[test]
    fn burst_high_single_frame_degenerates_to_frame() {
        let g = GovernorSpec::Burst { qw: 1, tmax: 1e-4 };
        for i in 1..100 {
            let s = spec(i as f64 / 100.0, Distribution::PoissonExact);
            let a = toff_burst_high(&s, &g, &hw()).unwrap();
            let b = toff_frame(&s, &hw()).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn rho_star_examples() {
        let s = spec(0.5, Distribution::PoissonExact);
        assert_relative_eq!(rho_star(&burst(), &s).unwrap(), 0.152, max_relative = 1e-12);
        let one = GovernorSpec::Burst { qw: 1, tmax: 1e-4 };
        assert_eq!(rho_star(&one, &s).unwrap(), 0.0);
        let forever = GovernorSpec::Burst { qw: 20, tmax: f64::INFINITY };
        assert_eq!(rho_star(&forever, &s).unwrap(), 0.0);
        let tiny = GovernorSpec::Burst { qw: 20, tmax: 1e-9 };
        assert_eq!(rho_star(&tiny, &s).unwrap(), 1.0);
        assert_eq!(rho_star(&GovernorSpec::Frame, &s), Err(ModelError::NotBurst));
    }

    #[test]
    fn dispatcher_picks_regime() {
        let hw = hw();
        let s = spec(0.3, Distribution::PoissonExact);
        assert_eq!(
            toff(&s, &GovernorSpec::Frame, &hw).unwrap(),
            toff_frame(&s, &hw).unwrap()
        );
        let low = spec(0.05, Distribution::PoissonExact);
        assert_eq!(select_curve(&low, &burst()).unwrap(), ToffCurve::BurstLow);
        assert_eq!(
            toff(&low, &burst(), &hw).unwrap(),
            toff_burst_low(&low, &burst(), &hw).unwrap()
        );
        let high = spec(0.5, Distribution::PoissonExact);
        assert_eq!(select_curve(&high, &burst()).unwrap(), ToffCurve::BurstHighPoisson);
        assert_eq!(
            toff(&high, &burst(), &hw).unwrap(),
            toff_burst_high(&high, &burst(), &hw).unwrap()
        );
        // ρ = ρ* exactly falls into the high regime
        let at = spec(0.152, Distribution::GeneralApprox);
        let rs = rho_star(&burst(), &at).unwrap();
        assert_eq!(select_curve(&at.with_load(rs), &burst()).unwrap(), ToffCurve::BurstHighApprox);
    }

    #[test]
    fn link_energy_limits() {
        let hw = hw();
        for gov in [GovernorSpec::Frame, burst()] {
            for d in [Distribution::PoissonExact, Distribution::GeneralApprox] {
                assert_eq!(link_energy(&spec(0.0, d), &gov, &hw).unwrap(), 0.1);
                assert_eq!(link_energy(&spec(1.0, d), &gov, &hw).unwrap(), 1.0);
            }
        }
        let e = link_energy(&spec(0.5, Distribution::PoissonExact), &GovernorSpec::Frame, &hw).unwrap();
        assert_relative_eq!(e, 0.984_390_381_076_920_4, max_relative = 1e-12);
    }

    #[test]
    fn link_energy_near_zero_load_tends_to_sigma() {
        let hw = hw();
        for gov in [GovernorSpec::Frame, burst()] {
            for d in [Distribution::PoissonExact, Distribution::GeneralApprox] {
                let e = link_energy(&spec(1e-9, d), &gov, &hw).unwrap();
                assert!((e - 0.1).abs() < 1e-3, "{gov:?} {d:?} {e}");
            }
        }
    }

    #[test]
    fn link_energy_rejects_out_of_range_load() {
        let s = TrafficSpec {
            mean_service_rate: MU,
            load: 1.2,
            distribution: Distribution::PoissonExact,
        };
        assert!(matches!(
            link_energy(&s, &GovernorSpec::Frame, &hw()),
            Err(ModelError::LoadOutOfRange(_))
        ));
    }

    #[test]
    fn bundle_energy_extremes() {
        let links = vec![hw(); 4];
        let idle = bundle_energy(&[0.0; 4], &links, &GovernorSpec::Frame, Distribution::PoissonExact, 1000.0).unwrap();
        assert_relative_eq!(idle.raw, 0.4, max_relative = 1e-12);
        assert_relative_eq!(idle.normalized, 0.1, max_relative = 1e-12);
        let full = bundle_energy(&[10e9; 4], &links, &burst(), Distribution::PoissonExact, 1000.0).unwrap();
        assert_eq!(full.raw, 4.0);
        let err = bundle_energy(&[11e9, 0.0, 0.0, 0.0], &links, &burst(), Distribution::PoissonExact, 1000.0);
        assert!(matches!(err, Err(ModelError::RateOutOfRange { link: 0, .. })));
    }

    #[test]
    fn concentrated_share_beats_even_share() {
        let links = vec![hw(); 2];
        let wf = bundle_energy(&[5e9, 0.0], &links, &GovernorSpec::Frame, Distribution::PoissonExact, 1000.0).unwrap();
        let eq = bundle_energy(&[2.5e9, 2.5e9], &links, &GovernorSpec::Frame, Distribution::PoissonExact, 1000.0).unwrap();
        assert!(wf.raw < eq.raw);
    }

    #[test]
    fn margin_of_constant_is_zero() {
        let c = |_x: f64| 3.0e-6;
        let m = concavity_margin(&c, 7.36e-6, 0.5, Derivatives::central()).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(
            concavity_margin(&c, 7.36e-6, 0.5, Derivatives::Analytic),
            Err(ModelError::NoAnalyticDerivatives)
        );
    }

    #[test]
    fn margin_rejects_points_near_edges() {
        let c = |x: f64| x;
        for x in [1e-4, 1.0 - 1e-4] {
            assert!(matches!(
                concavity_margin(&c, 1.0, x, Derivatives::central()),
                Err(ModelError::NearDomainEdge { .. })
            ));
        }
    }

    #[test]
    fn approx_frame_margin_has_closed_form() {
        // f = 1/(µρ) − Ts gives f″(f + b) − 2f′² = 2 Tw / (µ ρ³)
        let hw = hw();
        let sc = SojournCurve::new(ToffCurve::FrameApprox, &hw, &GovernorSpec::Frame, 1000.0).unwrap();
        for rho in [0.05, 0.2, 0.5, 0.9] {
            let m = concavity_margin(&sc, hw.transition_time(), rho, Derivatives::Analytic).unwrap();
            assert_relative_eq!(m, 2.0 * hw.tw / (MU * rho.powi(3)), max_relative = 1e-6);
        }
    }

    #[test]
    fn poisson_frame_margin_positive_at_reference_point() {
        // µρTs = 1.8
        let hw = hw();
        let sc = SojournCurve::new(ToffCurve::FramePoisson, &hw, &GovernorSpec::Frame, 1000.0).unwrap();
        let rho = 1.8 / (MU * hw.ts);
        let m = concavity_margin(&sc, hw.transition_time(), rho, Derivatives::Analytic).unwrap();
        assert!(m > 0.0);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let hw = hw();
        let b = hw.transition_time();
        for curve in ToffCurve::ALL {
            for pkt in [64.0, 1000.0, 9000.0] {
                let sc = SojournCurve::new(curve, &hw, &burst(), pkt).unwrap();
                for rho in [0.05, 0.3, 0.7] {
                    let [d1, d2] = sc.derivatives(rho).unwrap();
                    let [_, n1, n2] = central_derivatives(&sc, rho, 1e-5);
                    let tol = |v: f64| 1e-4 * v.abs() + 1e-30;
                    assert!((d1 - n1).abs() <= tol(d1), "{curve:?} {pkt} {rho}: {d1} vs {n1}");
                    assert!((d2 - n2).abs() <= tol(d2) * 10.0, "{curve:?} {pkt} {rho}: {d2} vs {n2}");
                    let _ = b;
                }
            }
        }
    }

    #[test]
    fn smooth_branch_equals_clamped_value_where_positive() {
        let hw = hw();
        for curve in ToffCurve::ALL {
            let sc = SojournCurve::new(curve, &hw, &burst(), 1500.0).unwrap();
            for rho in [0.01, 0.1, 0.5] {
                let smooth = sc.value(rho);
                let model = sc.toff(rho).unwrap();
                if smooth > 0.0 {
                    assert_relative_eq!(smooth, model, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        let hw = hw();
        let g = GovernorSpec::Frame;
        assert!(energy_second_derivative_grid(ToffCurve::FramePoisson, &g, &hw, &[32.0], &[0.5]).is_err());
        assert!(energy_second_derivative_grid(ToffCurve::FramePoisson, &g, &hw, &[64.0], &[0.0001]).is_err());
        assert_eq!(
            energy_second_derivative_grid(ToffCurve::BurstLow, &g, &hw, &[64.0], &[0.5]),
            Err(ModelError::NotBurst)
        );
    }

    #[test]
    fn single_precision_energy() {
        let hw = LinkParams::<f32>::ten_gbase_t();
        let s = TrafficSpec::new(1.25e6_f32, 0.5, Distribution::PoissonExact).unwrap();
        let e = link_energy(&s, &GovernorSpec::Frame, &hw).unwrap();
        assert!((e - 0.984_390_4).abs() < 1e-5);
    }

    #[test]
    fn parameter_validation() {
        assert!(LinkParams::new(0.0, 1e-6, 1e-6, 0.1).is_err());
        assert!(LinkParams::new(1e9, 1e-6, 1e-6, 1.0).is_err());
        assert!(LinkParams::new(1e9, -1e-6, 1e-6, 0.1).is_err());
        assert!(GovernorSpec::burst(0, 1e-4).is_err());
        assert!(GovernorSpec::burst(20, 0.0).is_err());
        assert!(TrafficSpec::new(0.0, 0.5, Distribution::PoissonExact).is_err());
        assert!(TrafficSpec::new(1.0, 1.5, Distribution::PoissonExact).is_err());
    }
}
