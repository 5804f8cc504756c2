//! Static allocation of an aggregate demand over the links of a bundle.
//!
//! With a concave per-link energy `E`, the bundle energy `Σ E(x_i)` is
//! minimized at a vertex of the feasible polytope: fill the largest link to
//! capacity, then the next one, and leave at most one link partially loaded.
//! [`waterfill`] builds that vertex; [`brute_force_min`] searches a grid of
//! the polytope and is kept as an independent check of the claim.

use thiserror::Error;

use crate::model::{bundle_energy, Distribution, GovernorSpec, LinkParams, ModelError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("bundle has no links")]
    EmptyBundle,
    #[error("demand {demand} b/s exceeds usable capacity {capacity} b/s")]
    Infeasible { demand: f64, capacity: f64 },
    #[error("demand must be a non-negative finite rate, got {0}")]
    InvalidDemand(f64),
    #[error("max_utilization must lie in (0, 1], got {0}")]
    InvalidUtilization(f64),
    #[error("grid search supports at most 3 links, bundle has {0}")]
    Unsupported(usize),
    #[error("grid step must be positive, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn f64_of<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Links of a bundle plus the utilization cap applied by [`waterfill_capped`].
///
/// Links keep the order they were given in; `order()` lists them by
/// non-increasing capacity (ties in original order), which is the order
/// every allocator fills them in.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSpec<T> {
    links: Vec<LinkParams<T>>,
    order: Vec<usize>,
    max_utilization: T,
}

impl<T: Scalar> BundleSpec<T> {
    pub fn new(links: Vec<LinkParams<T>>, max_utilization: T) -> Result<Self, AllocError> {
        if links.is_empty() {
            return Err(AllocError::EmptyBundle);
        }
        for l in &links {
            l.validate()?;
        }
        if !(max_utilization > T::zero() && max_utilization <= T::one()) {
            return Err(AllocError::InvalidUtilization(f64_of(max_utilization)));
        }
        let mut order: Vec<usize> = (0..links.len()).collect();
        // stable: equal capacities stay in index order
        order.sort_by(|&a, &b| {
            links[b]
                .capacity_bps
                .partial_cmp(&links[a].capacity_bps)
                .expect("validated capacities")
        });
        Ok(Self {
            links,
            order,
            max_utilization,
        })
    }

    /// `n` identical links with no utilization cap.
    pub fn uniform(n: usize, link: LinkParams<T>) -> Result<Self, AllocError> {
        Self::new(vec![link; n], T::one())
    }

    pub fn with_max_utilization(mut self, max_utilization: T) -> Result<Self, AllocError> {
        if !(max_utilization > T::zero() && max_utilization <= T::one()) {
            return Err(AllocError::InvalidUtilization(f64_of(max_utilization)));
        }
        self.max_utilization = max_utilization;
        Ok(self)
    }

    pub fn links(&self) -> &[LinkParams<T>] {
        &self.links
    }

    /// Link indices by non-increasing capacity.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn max_utilization(&self) -> T {
        self.max_utilization
    }

    pub fn total_capacity(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.capacity_bps)
    }
}

/// Per-link offered rates (bits/second, in the bundle's link order) and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector<T> {
    pub rates: Vec<T>,
    pub demand: T,
}

impl<T: Scalar> AllocationVector<T> {
    /// Checks `Σ rates = demand` (1e-6 relative) and `0 ≤ x_i ≤ C_i`.
    pub fn is_feasible_for(&self, bundle: &BundleSpec<T>) -> bool {
        if self.rates.len() != bundle.len() {
            return false;
        }
        let sum = self.rates.iter().fold(T::zero(), |a, &x| a + x);
        let tol = T::lit(1e-6) * self.demand.abs().max(T::one());
        (sum - self.demand).abs() <= tol
            && self
                .rates
                .iter()
                .zip(bundle.links())
                .all(|(&x, l)| x >= T::zero() && x <= l.capacity_bps)
    }

    /// Per-link loads `x_i / C_i`.
    pub fn loads(&self, bundle: &BundleSpec<T>) -> Vec<T> {
        self.rates
            .iter()
            .zip(bundle.links())
            .map(|(&x, l)| x / l.capacity_bps)
            .collect()
    }

    /// Fraction of the demand carried by each link (all zeros for zero demand).
    pub fn shares(&self) -> Vec<T> {
        if self.demand > T::zero() {
            self.rates.iter().map(|&x| x / self.demand).collect()
        } else {
            vec![T::zero(); self.rates.len()]
        }
    }
}

fn check_demand<T: Scalar>(demand: T, usable: T) -> Result<(), AllocError> {
    if !(demand >= T::zero()) || !demand.is_finite() {
        return Err(AllocError::InvalidDemand(f64_of(demand)));
    }
    if demand > usable * (T::one() + T::lit(1e-12)) {
        return Err(AllocError::Infeasible {
            demand: f64_of(demand),
            capacity: f64_of(usable),
        });
    }
    Ok(())
}

fn fill_sequentially<T: Scalar>(bundle: &BundleSpec<T>, demand: T, utilization: T) -> Result<AllocationVector<T>, AllocError> {
    let usable = bundle.total_capacity() * utilization;
    check_demand(demand, usable)?;
    let mut rates = vec![T::zero(); bundle.len()];
    let mut remaining = demand;
    for &i in bundle.order() {
        let cap = bundle.links[i].capacity_bps * utilization;
        let x = cap.min(remaining).max(T::zero());
        rates[i] = x;
        remaining = remaining - x;
    }
    Ok(AllocationVector { rates, demand })
}

/// `x_i = min{C_i, X − Σ_{j<i} x_j}` over links in non-increasing capacity order.
pub fn waterfill<T: Scalar>(bundle: &BundleSpec<T>, demand: T) -> Result<AllocationVector<T>, AllocError> {
    fill_sequentially(bundle, demand, T::one())
}

/// Water-filling against `max_utilization · C_i`.
pub fn waterfill_capped<T: Scalar>(bundle: &BundleSpec<T>, demand: T) -> Result<AllocationVector<T>, AllocError> {
    fill_sequentially(bundle, demand, bundle.max_utilization)
}

/// Equal load on every link: `x_i = X · C_i / Σ C`.
pub fn equitable<T: Scalar>(bundle: &BundleSpec<T>, demand: T) -> Result<AllocationVector<T>, AllocError> {
    let total = bundle.total_capacity();
    check_demand(demand, total)?;
    let rates = bundle
        .links
        .iter()
        .map(|l| (demand * l.capacity_bps / total).min(l.capacity_bps))
        .collect();
    Ok(AllocationVector { rates, demand })
}

/// One evaluated point of the brute-force grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint<T> {
    pub allocation: AllocationVector<T>,
    pub energy_raw: T,
}

/// Every feasible grid point with its analytic `E_B`.
///
/// The first `N − 1` links (in capacity order) take values `C_i·k/n_i` with
/// `n_i = round(C_i / step)`; the last link carries the remainder.
pub fn brute_force_sweep<T: Scalar>(
    bundle: &BundleSpec<T>,
    demand: T,
    gov: &GovernorSpec<T>,
    distribution: Distribution,
    pkt_bytes: T,
    step: T,
) -> Result<Vec<GridPoint<T>>, AllocError> {
    let n = bundle.len();
    if n > 3 {
        return Err(AllocError::Unsupported(n));
    }
    if !(step > T::zero()) || !step.is_finite() {
        return Err(AllocError::InvalidStep(f64_of(step)));
    }
    check_demand(demand, bundle.total_capacity())?;

    let order = bundle.order();
    let cells: Vec<usize> = order[..n - 1]
        .iter()
        .map(|&i| {
            let c = bundle.links[i].capacity_bps;
            (c / step).round().to_usize().unwrap_or(0).max(1)
        })
        .collect();
    let last = order[n - 1];
    let last_cap = bundle.links[last].capacity_bps;
    let tol = T::lit(1e-9) * bundle.total_capacity();

    let mut points = Vec::new();
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut rates = vec![T::zero(); n];
        let mut used = T::zero();
        for (d, &i) in order[..n - 1].iter().enumerate() {
            let c = bundle.links[i].capacity_bps;
            let x = c * T::from_usize(idx[d]).unwrap() / T::from_usize(cells[d]).unwrap();
            rates[i] = x;
            used = used + x;
        }
        let rest = demand - used;
        if rest >= -tol && rest <= last_cap + tol {
            rates[last] = rest.max(T::zero()).min(last_cap);
            let e = bundle_energy(&rates, bundle.links(), gov, distribution, pkt_bytes)?;
            points.push(GridPoint {
                allocation: AllocationVector { rates, demand },
                energy_raw: e.raw,
            });
        }
        // odometer over the first n − 1 links
        let mut d = 0;
        loop {
            if d == n - 1 {
                return Ok(points);
            }
            idx[d] += 1;
            if idx[d] <= cells[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn lex_greater<T: Scalar>(a: &[T], b: &[T], order: &[usize]) -> bool {
    for &i in order {
        if a[i] > b[i] {
            return true;
        }
        if a[i] < b[i] {
            return false;
        }
    }
    false
}

/// Grid point of minimum analytic `E_B`; ties go to the vector that loads earlier links most.
pub fn brute_force_min<T: Scalar>(
    bundle: &BundleSpec<T>,
    demand: T,
    gov: &GovernorSpec<T>,
    distribution: Distribution,
    pkt_bytes: T,
    step: T,
) -> Result<AllocationVector<T>, AllocError> {
    let points = brute_force_sweep(bundle, demand, gov, distribution, pkt_bytes, step)?;
    let rel = T::lit(1e-12);
    let mut best: Option<&GridPoint<T>> = None;
    for p in &points {
        best = match best {
            None => Some(p),
            Some(b) => {
                let tie = (p.energy_raw - b.energy_raw).abs() <= rel * b.energy_raw.abs();
                if (!tie && p.energy_raw < b.energy_raw)
                    || (tie && lex_greater(&p.allocation.rates, &b.allocation.rates, bundle.order()))
                {
                    Some(p)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|p| p.allocation.clone()).ok_or(AllocError::Infeasible {
        demand: f64_of(demand),
        capacity: f64_of(bundle.total_capacity()),
    })
}
