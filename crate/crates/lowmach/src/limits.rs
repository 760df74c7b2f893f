//! The two headline measurements: the low Mach number convergence rate of
//! the compressible perturbation toward the incompressible one, and the
//! time-decay rate of the free perturbation.
//!
//! Both are torus emulations of whole-space statements, so each carries a
//! window guard. The low-Mach sweep must finish before the acoustic wave
//! wraps the box for the smallest eps (after recurrence the dispersive
//! decay that produces the eps-gain restarts and the L^r_t integral loses
//! its scaling). The decay fit needs log(1+t) range to resolve a slope,
//! and its algebraic envelope comes from data spread over several dyadic
//! shells with a prescribed spectral slope: the max over shells of
//! 2^{j(s - s0)} e^{-c 4^j t} tracks t^{-(s-s0)/2}, which for s0 = 1/2 is
//! exactly the claimed -s/2 + 1/4.

use crate::besov::{besov_norm, sobolev_norm, NormSpec};
use crate::datagen::random_band_field;
use crate::error::{LabError, Result};
use crate::evolution::{CompressibleSystem, IncompressibleState, IncompressibleSystem,
    PerturbationState, StepOptions};
use crate::field::{phys_lp_norm, SpectralField};
use crate::fit::{fit_rate, RateFit};
use crate::grid::Grid;
use crate::multiplier::{project_gradient, project_solenoidal};
use crate::paley::DyadicFilterBank;
use crate::params::PhysicalParams;
use crate::stationary::{
    force_norm, solve_compressible_stationary, solve_incompressible_stationary,
    CompressibleSolveOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Time before the fastest acoustic packet crosses half the box at speed
/// gamma/eps; dispersive decay measured past this point sees the wrap.
pub fn recurrence_guard(eps: f64, grid: &Grid, params: &PhysicalParams) -> f64 {
    0.5 * params.eps_eff(eps) * grid.len() / (2.0 * std::f64::consts::PI)
}

/// One family of initial data shared across the eps sweep: the density
/// perturbation is eps * sigma_hat (so rho_{eps,0} - rho*_eps = O(eps^2)
/// in physical units), the velocity perturbation w0 is fixed and carries a
/// nonzero gradient component - that component is what makes the family
/// ill-prepared.
pub struct IllPreparedData {
    pub sigma_hat: SpectralField,
    pub w0: SpectralField,
}

fn data_norm(f: &SpectralField, bank: &DyadicFilterBank) -> f64 {
    besov_norm(f, bank, NormSpec::new(0.5, 2.0, f64::INFINITY).unwrap())
        .max(sobolev_norm(f, 3.0))
}

impl IllPreparedData {
    /// Random band-limited family with spectral slope `slope` across the
    /// dyadic shells of `band`, each part normalized to `amplitude` in
    /// B^{1/2}_{2,inf} cap H^3.
    pub fn generate(
        grid: &Grid,
        bank: &DyadicFilterBank,
        seed: u64,
        amplitude: f64,
        band: (i32, i32),
        slope: f64,
    ) -> Result<IllPreparedData> {
        if amplitude < 0.0 {
            return Err(LabError::config("data amplitude must be >= 0"));
        }
        let (lo, hi) = band;
        if lo < bank.j_min() || hi > bank.j_max() || lo > hi {
            return Err(LabError::config(format!(
                "data band [{lo}, {hi}] outside resolved shells [{}, {}]",
                bank.j_min(),
                bank.j_max()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sigma_hat = random_band_field(grid, 1, band, slope, &mut rng);
        let mut w0 = random_band_field(grid, 3, band, slope, &mut rng);
        if amplitude == 0.0 {
            sigma_hat.scale(0.0);
            w0.scale(0.0);
        } else {
            sigma_hat.scale(amplitude / data_norm(&sigma_hat, bank));
            w0.scale(amplitude / data_norm(&w0, bank));
            let q_part = project_gradient(&w0).l2_norm();
            assert!(
                q_part > 1e-8 * w0.l2_norm(),
                "generated velocity data has no gradient component"
            );
        }
        Ok(IllPreparedData { sigma_hat, w0 })
    }

    pub fn state_for(&self, eps: f64) -> PerturbationState {
        let mut sigma = self.sigma_hat.clone();
        sigma.scale(eps);
        PerturbationState::new(sigma, self.w0.clone())
    }
}

/// Sampled scalar diagnostics along one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> TimeSeries {
        assert!(times.windows(2).all(|p| p[1] > p[0]), "times must increase");
        TimeSeries {
            times,
            columns: Vec::new(),
        }
    }

    pub fn push_column(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.times.len());
        assert!(values.iter().all(|v| v.is_finite()));
        self.columns.push((name.to_string(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// L^r norm in time over the sampled window by the trapezoid rule on the
/// given (generally geometric) nodes; r = infinity takes the sup.
pub fn lr_time_norm(times: &[f64], values: &[f64], r: f64) -> f64 {
    assert_eq!(times.len(), values.len());
    assert!(r >= 1.0);
    if r.is_infinite() {
        return values.iter().fold(0.0, |a, &b| a.max(b));
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc += 0.5 * dt * (values[k - 1].powf(r) + values[k].powf(r));
    }
    acc.powf(1.0 / r)
}

/// Bound on the L^r tail past the window, extrapolating the decay observed
/// over the last quarter of the samples as (1+t)^beta. Finite only when
/// the observed decay is integrable (r beta < -1); otherwise the reported
/// bound is the end value itself and `finite` is false.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBound {
    pub bound: f64,
    pub local_slope: f64,
    pub finite: bool,
}

pub fn tail_bound(times: &[f64], values: &[f64], r: f64) -> TailBound {
    let n = times.len();
    let last = values[n - 1];
    if last <= 0.0 {
        return TailBound {
            bound: 0.0,
            local_slope: f64::NEG_INFINITY,
            finite: true,
        };
    }
    let take = (n / 4).max(4).min(n);
    let samples: Vec<(f64, f64)> = (n - take..n)
        .map(|k| (1.0 + times[k], values[k]))
        .collect();
    let beta = match fit_rate(&samples, false, true) {
        Ok(f) => f.slope,
        Err(_) => {
            return TailBound {
                bound: last,
                local_slope: f64::NAN,
                finite: false,
            }
        }
    };
    let t_end = 1.0 + times[n - 1];
    if r.is_infinite() {
        return TailBound {
            bound: last,
            local_slope: beta,
            finite: beta <= 0.0,
        };
    }
    if r * beta < -1.0 {
        let integral = last.powf(r) * t_end / (-r * beta - 1.0);
        TailBound {
            bound: integral.powf(1.0 / r),
            local_slope: beta,
            finite: true,
        }
    } else {
        TailBound {
            bound: last,
            local_slope: beta,
            finite: false,
        }
    }
}

/// t = 0 followed by geometric nodes from `t_first` to `t_end`.
pub fn geometric_times(t_end: f64, t_first: f64, per_octave: usize) -> Vec<f64> {
    assert!(t_end > t_first && t_first > 0.0 && per_octave >= 1);
    let octaves = (t_end / t_first).log2();
    let count = (octaves * per_octave as f64).ceil() as usize;
    let mut times = vec![0.0];
    for k in 0..=count {
        let t = t_first * (t_end / t_first).powf(k as f64 / count as f64);
        times.push(t.min(t_end));
    }
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * t_end);
    times
}

/// The paper's sufficiency window for the rate exponents. The headline
/// measurement point (4, 4, 0.6) sits outside it (the window is empty at
/// p = r = 4; it needs r > 8), yet the envelope exponent
/// min(1/r, 1/2 - 1/p) is well defined there and the measured slope is
/// the object of interest - so the window is reported, not enforced.
pub fn hypothesis_window(p: f64, r: f64, s: f64) -> bool {
    0.5 + 2.0 / r < s && s < 3.0 / p
}

#[derive(Clone, Debug, Serialize)]
pub struct LowMachRow {
    pub eps: f64,
    /// eps^{-1} ||rho - rho*|| = ||sigma|| in the solver's density units.
    pub density_term: f64,
    pub q_velocity_term: f64,
    pub p_velocity_gap: f64,
    pub total: f64,
    pub lp_total: f64,
    pub envelope: f64,
    pub sup_witness: f64,
    pub tail: TailBound,
}

#[derive(Debug, Serialize)]
pub struct LowMachReport {
    pub fit: RateFit,
    pub density_fit: RateFit,
    pub q_velocity_fit: RateFit,
    pub p_velocity_fit: RateFit,
    pub lp_fit: RateFit,
    pub rows: Vec<LowMachRow>,
    pub failures: Vec<(f64, String)>,
    pub delta1: f64,
    pub target: f64,
    pub hypothesis_met: bool,
}

#[allow(clippy::too_many_arguments)]
pub struct LowMachConfig {
    pub p: f64,
    pub r: f64,
    pub s: f64,
    pub t_end: f64,
    pub stationary_tol: f64,
    pub opts: StepOptions,
}

fn joint_sample_times(t_end: f64) -> Vec<f64> {
    geometric_times(t_end, t_end / 256.0, 4)
}

/// The three (machesti) addends for one eps, plus the corollary L^p
/// version, the (inifor2) sup witness, and the tail bound of the summed
/// integrand.
pub fn measure_low_mach_eps(
    bank: &DyadicFilterBank,
    force: &SpectralField,
    data: &IllPreparedData,
    eps: f64,
    cfg: &LowMachConfig,
    params: &PhysicalParams,
) -> Result<(LowMachRow, TimeSeries, f64)> {
    let grid = bank.grid();
    let spec = NormSpec::new(cfg.s, cfg.p, 1.0)?;
    let half = NormSpec::new(0.5, 2.0, f64::INFINITY).unwrap();
    let pair = solve_compressible_stationary(
        bank,
        force,
        eps,
        params,
        CompressibleSolveOptions {
            tol: cfg.stationary_tol,
            j_cut: bank.j_max() + 1,
            init: None,
        },
    )?;
    let inc = solve_incompressible_stationary(bank, force, params, cfg.stationary_tol)?;
    let state0 = data.state_for(eps);
    // matched start: u(0) = P v(0), i.e. u~(0) = P(v* + w0) - u*
    let mut ut0 = project_solenoidal(&pair.v_star);
    ut0.axpy(1.0, &project_solenoidal(&state0.w));
    ut0.axpy(-1.0, &inc.u_star);

    let times = joint_sample_times(cfg.t_end);
    let mut isys = IncompressibleSystem::new(grid, &inc.u_star, params);
    let mut ut_snaps: Vec<SpectralField> = Vec::with_capacity(times.len());
    isys.integrate(
        IncompressibleState {
            u_tilde: ut0.clone(),
            t: 0.0,
        },
        cfg.t_end,
        cfg.opts,
        &times,
        |s| ut_snaps.push(s.u_tilde.clone()),
    )?;
    if ut_snaps.len() != times.len() {
        return Err(LabError::numerics("incompressible sampling incomplete"));
    }

    let mut density = Vec::with_capacity(times.len());
    let mut q_vel = Vec::with_capacity(times.len());
    let mut p_gap = Vec::with_capacity(times.len());
    let mut lp_rows = Vec::with_capacity(times.len());
    let mut witness = Vec::with_capacity(times.len());
    let lp = |f: &SpectralField| phys_lp_norm(grid, &f.to_physical_all(), f.components(), cfg.p);
    let mut sys = CompressibleSystem::perturbation(grid, &pair, eps, params);
    let mut k = 0usize;
    sys.integrate(state0, cfg.t_end, cfg.opts, &times, |st| {
        let qw = project_gradient(&st.w);
        let pw = project_solenoidal(&st.w);
        let mut gap = pw;
        gap.axpy(-1.0, &ut_snaps[k]);
        density.push(besov_norm(&st.sigma, bank, spec));
        q_vel.push(besov_norm(&qw, bank, spec));
        p_gap.push(besov_norm(&gap, bank, spec));
        lp_rows.push((lp(&st.sigma), lp(&qw), lp(&gap)));
        witness.push(
            besov_norm(&ut_snaps[k], bank, half)
                + data_norm(&st.sigma, bank)
                + data_norm(&st.w, bank),
        );
        k += 1;
    })?;
    if k != times.len() {
        return Err(LabError::numerics("compressible sampling incomplete"));
    }

    let density_term = lr_time_norm(&times, &density, cfg.r);
    let q_velocity_term = lr_time_norm(&times, &q_vel, cfg.r);
    let p_velocity_gap = lr_time_norm(&times, &p_gap, cfg.r);
    let summed: Vec<f64> = (0..times.len())
        .map(|i| density[i] + q_vel[i] + p_gap[i])
        .collect();
    let lp_total = lr_time_norm(
        &times,
        &lp_rows.iter().map(|&(a, b, c)| a + b + c).collect::<Vec<_>>(),
        cfg.r,
    );
    let tail = tail_bound(&times, &summed, cfg.r);
    let mut series = TimeSeries::new(times);
    series.push_column("density", density);
    series.push_column("q_velocity", q_vel);
    series.push_column("p_velocity_gap", p_gap);
    series.push_column("witness", witness.clone());

    // the per-eps part of delta1: the (smallassumption2) left side
    let mut pv0 = project_solenoidal(&pair.v_star);
    pv0.axpy(1.0, &project_solenoidal(&data.w0));
    pv0.axpy(-1.0, &inc.u_star);
    let mut sigma0 = data.sigma_hat.clone();
    sigma0.scale(eps);
    let data_part =
        besov_norm(&pv0, bank, half) + data_norm(&sigma0, bank) + data_norm(&data.w0, bank);

    let row = LowMachRow {
        eps,
        density_term,
        q_velocity_term,
        p_velocity_gap,
        total: density_term + q_velocity_term + p_velocity_gap,
        lp_total,
        envelope: f64::NAN, // filled by the sweep once delta1 is known
        sup_witness: witness.iter().fold(0.0, |a, &b| a.max(b)),
        tail,
    };
    Ok((row, series, data_part))
}

#[allow(clippy::too_many_arguments)]
pub fn run_low_mach_experiment(
    bank: &DyadicFilterBank,
    force: &SpectralField,
    data: &IllPreparedData,
    eps_list: &[f64],
    cfg: &LowMachConfig,
    params: &PhysicalParams,
) -> Result<(LowMachReport, Vec<TimeSeries>)> {
    if !(cfg.p > 2.0) {
        return Err(LabError::config(format!(
            "low-Mach rate needs p > 2, got {}",
            cfg.p
        )));
    }
    if !(cfg.r > 2.0) {
        return Err(LabError::config(format!(
            "low-Mach rate needs 2 < r <= inf, got {}",
            cfg.r
        )));
    }
    NormSpec::new(cfg.s, cfg.p, 1.0)?.validate()?;
    let eps_min = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(eps_min > 0.0) {
        return Err(LabError::config("eps values must be positive"));
    }
    let guard = recurrence_guard(eps_min, bank.grid(), params);
    if cfg.t_end > guard {
        return Err(LabError::config(format!(
            "window T = {} exceeds the acoustic recurrence guard {guard:.3} \
             for eps = {eps_min}; shrink T or the box",
            cfg.t_end
        )));
    }

    let mut rows = Vec::new();
    let mut all_series = Vec::new();
    let mut failures = Vec::new();
    let mut delta1 = force_norm(force, bank);
    for &eps in eps_list {
        match measure_low_mach_eps(bank, force, data, eps, cfg, params) {
            Ok((row, series, data_part)) => {
                delta1 = delta1.max(data_part);
                rows.push(row);
                all_series.push(series);
            }
            Err(e) => failures.push((eps, e.to_string())),
        }
    }
    if rows.len() < 4 {
        return Err(LabError::numerics(format!(
            "only {} of {} eps values produced trajectories; need >= 4 for a fit",
            rows.len(),
            eps_list.len()
        )));
    }
    let exponent = (1.0 / cfg.r).min(0.5 - 1.0 / cfg.p);
    for row in rows.iter_mut() {
        row.envelope = row.eps.powf(1.0 / cfg.r).max(row.eps.powf(0.5 - 1.0 / cfg.p)) * delta1;
    }
    let pick = |sel: fn(&LowMachRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.eps, sel(r))).collect()
    };
    let report = LowMachReport {
        fit: fit_rate(&pick(|r| r.total), false, true)?,
        density_fit: fit_rate(&pick(|r| r.density_term), false, true)?,
        q_velocity_fit: fit_rate(&pick(|r| r.q_velocity_term), false, true)?,
        p_velocity_fit: fit_rate(&pick(|r| r.p_velocity_gap), false, true)?,
        lp_fit: fit_rate(&pick(|r| r.lp_total), false, true)?,
        rows,
        failures,
        delta1,
        target: exponent,
        hypothesis_met: hypothesis_window(cfg.p, cfg.r, cfg.s),
    };
    Ok((report, all_series))
}

#[derive(Debug, Serialize)]
pub struct TimeDecayReport {
    pub fit: RateFit,
    pub target: f64,
    pub series: TimeSeries,
}

/// Decay of || (sigma, w)(t) ||_{B^s_{2,inf} cap H^4} against (1+t),
/// fitted on log-log axes over geometric samples.
pub fn measure_time_decay(
    bank: &DyadicFilterBank,
    force: &SpectralField,
    data: &IllPreparedData,
    eps: f64,
    s: f64,
    t_end: f64,
    params: &PhysicalParams,
    opts: &StepOptions,
) -> Result<TimeDecayReport> {
    if !(0.5..1.5).contains(&s) {
        return Err(LabError::config(format!(
            "decay exponent window is 1/2 <= s < 3/2, got {s}"
        )));
    }
    let min_window = (1.5f64).exp() - 1.0;
    if t_end < min_window {
        return Err(LabError::config(format!(
            "decay window T = {t_end} too small: need log(1+T) >= 1.5 \
             (T >= {min_window:.2}) to resolve a slope"
        )));
    }
    let grid = bank.grid();
    let spec = NormSpec::new(s, 2.0, f64::INFINITY)?;
    let mut sys = if force.l2_norm() > 0.0 {
        let pair = solve_compressible_stationary(
            bank,
            force,
            eps,
            params,
            CompressibleSolveOptions {
                tol: 1e-11,
                j_cut: bank.j_max() + 1,
                init: None,
            },
        )?;
        CompressibleSystem::perturbation(grid, &pair, eps, params)
    } else {
        CompressibleSystem::free(grid, eps, params)
    };

    let count = 24usize;
    let mut times: Vec<f64> = (0..=count)
        .map(|k| (1.0 + t_end).powf(k as f64 / count as f64) - 1.0)
        .collect();
    times[0] = 0.0;
    let mut values = Vec::with_capacity(times.len());
    let state0 = data.state_for(eps);
    sys.integrate(state0, t_end, *opts, &times, |st| {
        let mut joint = SpectralField::zeros(grid, 4);
        joint.comp_mut(0).copy_from_slice(st.sigma.comp(0));
        for c in 0..3 {
            joint.comp_mut(1 + c).copy_from_slice(st.w.comp(c));
        }
        values.push(besov_norm(&joint, bank, spec).max(sobolev_norm(&joint, 4.0)));
    })?;
    if values.len() != times.len() {
        return Err(LabError::numerics("decay sampling incomplete"));
    }
    if values.iter().any(|&v| v <= 0.0) {
        return Err(LabError::numerics(
            "zero norms in the decay series: degenerate fit",
        ));
    }
    let samples: Vec<(f64, f64)> = times
        .iter()
        .zip(&values)
        .map(|(&t, &v)| (1.0 + t, v))
        .collect();
    let fit = fit_rate(&samples, false, true)?;
    let mut series = TimeSeries::new(times);
    series.push_column("norm", values);
    Ok(TimeDecayReport {
        fit,
        target: -s / 2.0 + 0.25,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, l: f64) -> (Grid, DyadicFilterBank) {
        let g = Grid::new(n, l).unwrap();
        let bank = DyadicFilterBank::new(&g);
        (g, bank)
    }

    #[test]
    fn ill_prepared_family_scales_only_the_density() {
        let (g, bank) = setup(16, 2.0 * std::f64::consts::PI);
        let data = IllPreparedData::generate(&g, &bank, 7, 0.3, (0, 1), 0.5).unwrap();
        let a = data.state_for(0.5);
        let b = data.state_for(0.25);
        assert!(a.w.max_coeff_diff(&b.w) == 0.0);
        let na = a.sigma.l2_norm();
        let nb = b.sigma.l2_norm();
        assert!((na / nb - 2.0).abs() < 1e-12);
        assert!(a.sigma.mean(0).norm() < 1e-15);
        // normalization in the hypothesis norm
        assert!((data_norm(&data.w0, &bank) - 0.3).abs() < 1e-12);
        // ill-prepared: the gradient part is genuinely there
        assert!(project_gradient(&data.w0).l2_norm() > 1e-3 * data.w0.l2_norm());
    }

    #[test]
    fn time_quadrature_matches_closed_forms() {
        // f(t) = e^{-t}: ||f||_{L^r(0,T)} = ((1 - e^{-rT})/r)^{1/r}
        let times = geometric_times(6.0, 1e-4, 16);
        let vals: Vec<f64> = times.iter().map(|&t| (-t).exp()).collect();
        for r in [1.0, 2.0, 4.0] {
            let got = lr_time_norm(&times, &vals, r);
            let want = ((1.0 - (-r * 6.0f64).exp()) / r).powf(1.0 / r);
            assert!(
                (got - want).abs() < 1e-3 * want,
                "r = {r}: {got} vs {want}"
            );
        }
        assert_eq!(lr_time_norm(&times, &vals, f64::INFINITY), 1.0);

        // algebraic tail: f = (1+t)^{-2}, r = 2 tail from T: analytic
        // (int_T^inf (1+t)^{-4})^{1/2} = ((1+T)^{-3}/3)^{1/2}
        let vals2: Vec<f64> = times.iter().map(|&t| (1.0 + t).powi(-2)).collect();
        let tb = tail_bound(&times, &vals2, 2.0);
        let want = ((1.0f64 + 6.0).powi(-3) / 3.0).sqrt();
        assert!(tb.finite);
        assert!((tb.local_slope + 2.0).abs() < 0.05);
        assert!((tb.bound - want).abs() < 0.2 * want, "{} vs {want}", tb.bound);

        // non-integrable observed decay is flagged, not silently bounded
        let flat: Vec<f64> = times.iter().map(|_| 1.0).collect();
        assert!(!tail_bound(&times, &flat, 4.0).finite);
    }

    #[test]
    fn exponent_window_and_guards() {
        assert!(!hypothesis_window(4.0, 4.0, 0.6)); // the headline point
        assert!(hypothesis_window(4.0, 16.0, 0.7));
        assert!(hypothesis_window(4.0, f64::INFINITY, 0.6));

        let (g, bank) = setup(12, 2.0 * std::f64::consts::PI);
        let params = PhysicalParams::default();
        let data = IllPreparedData::generate(&g, &bank, 3, 0.05, (0, 1), 0.5).unwrap();
        let force = SpectralField::zeros(&g, 3);
        let cfg = LowMachConfig {
            p: 4.0,
            r: 4.0,
            s: 0.6,
            t_end: 10.0, // far beyond the guard for eps = 0.1 on a 2pi box
            stationary_tol: 1e-10,
            opts: StepOptions::default(),
        };
        let err = run_low_mach_experiment(&bank, &force, &data, &[0.4, 0.2, 0.1], &cfg, &params)
            .unwrap_err();
        assert!(err.to_string().contains("recurrence"), "{err}");

        let err =
            measure_time_decay(&bank, &force, &data, 0.5, 0.5, 1.0, &params, &StepOptions::default())
                .unwrap_err();
        assert!(err.to_string().contains("window"), "{err}");
    }

    #[test]
    fn zero_data_gives_zero_terms_and_degenerate_fits() {
        let (g, bank) = setup(12, 8.0 * std::f64::consts::PI);
        let params = PhysicalParams::default();
        let data = IllPreparedData::generate(&g, &bank, 3, 0.0, (0, 1), 0.5).unwrap();
        let force = SpectralField::zeros(&g, 3);
        let cfg = LowMachConfig {
            p: 4.0,
            r: 4.0,
            s: 0.6,
            t_end: 0.15,
            stationary_tol: 1e-10,
            opts: StepOptions::default(),
        };
        let (row, _, data_part) =
            measure_low_mach_eps(&bank, &force, &data, 0.3, &cfg, &params).unwrap();
        assert_eq!(row.total, 0.0);
        assert_eq!(row.density_term, 0.0);
        assert_eq!(row.q_velocity_term, 0.0);
        assert_eq!(row.p_velocity_gap, 0.0);
        assert_eq!(data_part, 0.0);
        assert!(row.tail.finite && row.tail.bound == 0.0);

        // the sweep then has nothing to fit - typed failure, not NaN
        let err = run_low_mach_experiment(
            &bank,
            &force,
            &data,
            &[0.4, 0.3, 0.2, 0.15],
            &cfg,
            &params,
        )
        .unwrap_err();
        assert!(err.to_string().contains("log fit"), "{err}");

        let err =
            measure_time_decay(&bank, &force, &data, 0.5, 0.5, 6.0, &params, &StepOptions::default())
                .unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn small_sweep_produces_connected_report() {
        let (g, bank) = setup(12, 16.0 * std::f64::consts::PI);
        let params = PhysicalParams::default();
        let data = IllPreparedData::generate(&g, &bank, 5, 0.05, (-1, 0), 0.5).unwrap();
        let force = SpectralField::zeros(&g, 3);
        let eps_list = [0.4, 0.3, 0.2, 0.1];
        let cfg = LowMachConfig {
            p: 4.0,
            r: 4.0,
            s: 0.6,
            t_end: 0.35, // guard for eps = 0.1 on the 16 pi box is 0.4
            stationary_tol: 1e-10,
            opts: StepOptions::default(),
        };
        let (report, series) =
            run_low_mach_experiment(&bank, &force, &data, &eps_list, &cfg, &params).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(series.len(), 4);
        assert!(report.failures.is_empty());
        assert!(!report.hypothesis_met);
        assert_eq!(report.target, 0.25);
        for row in &report.rows {
            assert!(row.total > 0.0 && row.total.is_finite());
            assert!(row.envelope > 0.0);
            assert!(row.sup_witness.is_finite());
            // with F = 0 the witness reduces to the data norms and must
            // stay of the order of delta1
            assert!(row.sup_witness < 20.0 * report.delta1);
        }
        assert!(report.fit.slope.is_finite());
        assert!(report.density_fit.slope.is_finite());
        assert!(report.lp_fit.slope.is_finite());
        // zero force: delta1 is carried by the data alone
        assert!(report.delta1 > 0.0);
        // small-data regime: halving the amplitude halves every addend up
        // to the quadratic feedback (the ill-prepared rotation feeding w0
        // into sigma is linear, so the addends are NOT linear in eps, but
        // they are linear in the data size)
        let half = IllPreparedData::generate(&g, &bank, 5, 0.025, (-1, 0), 0.5).unwrap();
        let (full_row, _, _) =
            measure_low_mach_eps(&bank, &force, &data, 0.2, &cfg, &params).unwrap();
        let (half_row, _, _) =
            measure_low_mach_eps(&bank, &force, &half, 0.2, &cfg, &params).unwrap();
        let ratio = full_row.total / half_row.total;
        assert!((1.8..=2.2).contains(&ratio), "amplitude ratio {ratio}");
        for s in &series {
            assert_eq!(s.column("density").unwrap().len(), s.times.len());
            assert!(s.column("witness").is_some());
        }
    }

    #[test]
    fn free_decay_is_measured_with_a_finite_fit() {
        let (g, bank) = setup(12, 8.0 * std::f64::consts::PI);
        let params = PhysicalParams::default();
        let data = IllPreparedData::generate(&g, &bank, 9, 0.05, (-1, 1), 0.5).unwrap();
        let force = SpectralField::zeros(&g, 3);
        let report = measure_time_decay(
            &bank,
            &force,
            &data,
            0.8,
            0.5,
            6.0,
            &params,
            &StepOptions::default(),
        )
        .unwrap();
        assert_eq!(report.target, 0.0);
        assert!(report.fit.slope.is_finite());
        let vals = report.series.column("norm").unwrap();
        assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
        // dissipation: the end of the window sits below the start
        assert!(vals[vals.len() - 1] < vals[0]);
        let report = measure_time_decay(
            &bank,
            &force,
            &data,
            0.8,
            1.0,
            6.0,
            &params,
            &StepOptions::default(),
        )
        .unwrap();
        assert_eq!(report.target, -0.25);
    }
}
