//! Parameter schedule and maximum-load guides as functions of `(n, d, l)`.
//!
//! All unbased logarithms are natural. `log_d` and `log_{d-1}` are explicit
//! changes of base. Bound values are evaluated with unit constants: they are
//! order-of-magnitude guides, not certified numbers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which allocation process the parameters describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every visited node is a candidate (`d` well above `log n`).
    Dense,
    /// Every `r_G`-th visited node is a candidate (`3 <= d <= O(log n)`).
    Sparse,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dense => "dense",
            Mode::Sparse => "sparse",
        })
    }
}

/// Knobs that the schedule leaves open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamOptions {
    /// Numerator constant of `rho`: 6 in the witness construction, 8 in the
    /// restatement used for the main bound.
    pub rho_constant: u32,
    /// Forces the choice spacing instead of `ceil(2 log_{d-1} ln n)`.
    pub r_g_override: Option<usize>,
}

impl Default for ParamOptions {
    fn default() -> Self {
        ParamOptions {
            rho_constant: 6,
            r_g_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub mode: Mode,
    /// `ln n / ln d`.
    pub log_d_n: f64,
    /// `sqrt(log_d n)` dense, `sqrt(log_d n / r_G)` sparse.
    pub gamma: f64,
    /// Choice spacing; 1 in dense mode.
    pub r_g: usize,
    /// Number of subpaths per partition, `max(4, floor(l / gamma))`.
    pub k: usize,
    /// Path length for multiplicity checks, `floor(floor(l/k) / 4)`.
    pub delta: usize,
    /// Load drop allowed per witness level; absent when `delta == 0`.
    pub rho: Option<usize>,
    pub rho_constant: u32,
    /// Witness tree depth, `ceil(ln ln n / ln(k - 2))`, at least 1.
    pub h: usize,
    /// Uniformity constant used for `n1`, taken as `22 (l + 1) / l`.
    pub alpha_guide: f64,
    /// `n1 / n = 1 / (6 e alpha)`.
    pub n1_fraction: f64,
    /// Lower-bound multiplicity `log_d n / (6 l r_G)`.
    pub tau: f64,
    /// `6 log_{d-1} n / delta`; absent when `delta == 0`.
    pub ndelta_threshold: Option<f64>,
    /// `12 log_{d-1} n / delta`, the count used when branching; absent when `delta == 0`.
    pub ndelta_threshold_branch: Option<f64>,
    /// `delta == 0`: rho and the multiplicity machinery are unavailable.
    pub degenerate: bool,
    /// Degree outside the range the mode is analysed for (`d <= ln n` in dense
    /// mode, `d > ln n` in sparse mode, or `d < 3`).
    pub degree_outside_mode: bool,
}

/// Rounds `x` to the nearest integer when it is within floating-point noise of it,
/// so that exact values such as `log_4 2^50 = 25` floor and ceil correctly.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

fn floor_u(x: f64) -> usize {
    snap(x).floor().max(0.0) as usize
}

fn ceil_u(x: f64) -> usize {
    snap(x).ceil().max(0.0) as usize
}

pub fn derive(n: usize, d: usize, l: usize, mode: Mode) -> DerivedParams {
    derive_with(n, d, l, mode, ParamOptions::default())
}

pub fn derive_with(n: usize, d: usize, l: usize, mode: Mode, opts: ParamOptions) -> DerivedParams {
    let ln_n = (n as f64).ln();
    let lnln_n = ln_n.ln();
    let log_d_n = snap(ln_n / (d as f64).ln());
    let log_dm1_n = ln_n / ((d as f64) - 1.0).ln();

    let r_g = match (mode, opts.r_g_override) {
        (_, Some(r)) => r.max(1),
        (Mode::Dense, None) => 1,
        (Mode::Sparse, None) if d >= 3 => ceil_u(2.0 * lnln_n / ((d - 1) as f64).ln()).max(1),
        (Mode::Sparse, None) => 1,
    };
    let gamma = match mode {
        Mode::Dense => log_d_n.sqrt(),
        Mode::Sparse => (log_d_n / r_g as f64).sqrt(),
    };
    let k = floor_u(l as f64 / gamma).max(4);
    let delta = (l / k) / 4;
    let degenerate = delta == 0;
    let rho = (!degenerate).then(|| ceil_u(opts.rho_constant as f64 * log_d_n / (delta * delta) as f64));
    let h = ceil_u(lnln_n / ((k - 2) as f64).ln()).max(1);
    let alpha_guide = 22.0 * (l as f64 + 1.0) / l.max(1) as f64;
    let n1_fraction = 1.0 / (6.0 * std::f64::consts::E * alpha_guide);
    let tau = log_d_n / (6.0 * l.max(1) as f64 * r_g as f64);
    let ndelta_threshold = (!degenerate && d >= 3).then(|| 6.0 * log_dm1_n / delta as f64);
    let ndelta_threshold_branch = (!degenerate && d >= 3).then(|| 12.0 * log_dm1_n / delta as f64);
    let degree_outside_mode = d < 3
        || match mode {
            Mode::Dense => (d as f64) <= ln_n,
            Mode::Sparse => (d as f64) > ln_n,
        };

    DerivedParams {
        n,
        d,
        l,
        mode,
        log_d_n,
        gamma,
        r_g,
        k,
        delta,
        rho,
        rho_constant: opts.rho_constant,
        h,
        alpha_guide,
        n1_fraction,
        tau,
        ndelta_threshold,
        ndelta_threshold_branch,
        degenerate,
        degree_outside_mode,
    }
}

impl DerivedParams {
    /// `floor(n * n1_fraction)`, at least 1.
    pub fn n1(&self) -> usize {
        ((self.n as f64 * self.n1_fraction).floor() as usize).max(1)
    }

    /// Walk length in edges actually taken by a ball.
    pub fn walk_length(&self) -> usize {
        self.l * self.r_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `l < 4 gamma`: the bound degrades like `1 / l^2`.
    I,
    /// `l >= 4 gamma`: the bound is `ln ln n / ln(l / gamma)`.
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub upper_bound: f64,
    pub lower_bound: f64,
    /// Load `h rho + c + 1` above which a witness tree must exist; absent for
    /// degenerate parameters.
    pub threshold_load: Option<usize>,
    pub notes: Vec<String>,
}

pub fn bounds(p: &DerivedParams, c: usize) -> BoundReport {
    let l = p.l as f64;
    let lnln_n = (p.n as f64).ln().ln();
    let r_g = p.r_g as f64;
    let regime = if l >= 4.0 * p.gamma { Regime::II } else { Regime::I };
    let upper_bound = match regime {
        Regime::I => p.log_d_n * lnln_n / (r_g * l * l),
        Regime::II => lnln_n / (l / p.gamma).ln(),
    };
    let lower_bound = p.log_d_n / (r_g * l * l);
    let threshold_load = p.rho.map(|rho| p.h * rho + c + 1);

    let mut notes = Vec::new();
    let ratio = l / p.gamma;
    if (0.5..=2.0).contains(&ratio) {
        notes.push(format!(
            "l is within a factor 2 of gamma ({:.3}); the maximum load is O(log log n) here",
            p.gamma
        ));
    }
    if p.degenerate {
        notes.push("delta = 0: rho and the witness threshold are unavailable".into());
    }
    if p.degree_outside_mode {
        notes.push(format!(
            "degree {} lies outside the range analysed for {} mode",
            p.d, p.mode
        ));
    }
    BoundReport {
        regime,
        upper_bound,
        lower_bound,
        threshold_load,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let p = derive(1 << 50, 4, 40, Mode::Dense);
        assert_eq!(p.log_d_n, 25.0);
        assert_eq!(p.gamma, 5.0);
        assert_eq!(p.k, 8);
        assert_eq!(p.delta, 1);
        assert_eq!(p.rho, Some(150));
        assert_eq!(p.h, 2);
        assert!(!p.degenerate);
    }

    #[test]
    fn rho_constant_override() {
        let opts = ParamOptions {
            rho_constant: 8,
            ..Default::default()
        };
        let p = derive_with(1 << 50, 4, 40, Mode::Dense, opts);
        assert_eq!(p.rho, Some(200));
    }

    #[test]
    fn small_l_is_degenerate() {
        let p = derive(1 << 50, 4, 10, Mode::Dense);
        assert_eq!(p.k, 4);
        assert_eq!(p.delta, 0);
        assert!(p.degenerate);
        assert_eq!(p.rho, None);
        assert_eq!(p.ndelta_threshold, None);
        assert_eq!(bounds(&p, 1).threshold_load, None);
    }

    #[test]
    fn sparse_spacing() {
        let p = derive(1 << 20, 3, 4, Mode::Sparse);
        assert_eq!(p.r_g, 8);
        assert!((p.gamma - (p.log_d_n / 8.0).sqrt()).abs() < 1e-12);
        let q = derive_with(
            1 << 20,
            3,
            4,
            Mode::Sparse,
            ParamOptions {
                r_g_override: Some(2),
                ..Default::default()
            },
        );
        assert_eq!(q.r_g, 2);
    }

    #[test]
    fn regime_boundary_goes_to_two() {
        // log_4 2^50 = 25, gamma = 5, 4 gamma = 20.
        let p = derive(1 << 50, 4, 20, Mode::Dense);
        let b = bounds(&p, 1);
        assert_eq!(b.regime, Regime::II);
        let lnln = ((1u64 << 50) as f64).ln().ln();
        assert!((b.upper_bound - lnln / 4f64.ln()).abs() < 1e-12);
        assert_eq!(bounds(&derive(1 << 50, 4, 19, Mode::Dense), 1).regime, Regime::I);
    }

    #[test]
    fn lower_bound_guide() {
        let p = derive(1 << 50, 4, 10, Mode::Dense);
        assert!((bounds(&p, 1).lower_bound - 0.25).abs() < 1e-12);
    }

    #[test]
    fn note_when_l_matches_gamma() {
        let p = derive(1 << 50, 4, 5, Mode::Dense);
        assert!(bounds(&p, 1).notes.iter().any(|s| s.contains("O(log log n)")));
        let far = derive(1 << 50, 4, 40, Mode::Dense);
        assert!(!bounds(&far, 1).notes.iter().any(|s| s.contains("O(log log n)")));
    }

    #[test]
    fn threshold_load() {
        let p = derive(1 << 50, 4, 40, Mode::Dense);
        assert_eq!(bounds(&p, 3).threshold_load, Some(2 * 150 + 3 + 1));
    }

    proptest! {
        #[test]
        fn k_monotone_and_invariants(exp in 4u32..60, d in 3usize..64, l in 2usize..200) {
            let n = 1usize << exp;
            let p = derive(n, d, l, Mode::Dense);
            let q = derive(n, d, l + 1, Mode::Dense);
            prop_assert!(p.k >= 4);
            prop_assert!(q.k >= p.k);
            prop_assert!(p.h >= 1);
            prop_assert_eq!(p.delta, (l / p.k) / 4);
            prop_assert_eq!(p.rho.is_some(), p.delta >= 1);
            if l >= 16 && p.k == 4 {
                prop_assert!(p.delta >= 1);
            }
            prop_assert_eq!(&p, &derive(n, d, l, Mode::Dense));
        }

        #[test]
        fn regimes_partition(exp in 4u32..60, d in 3usize..64, l in 2usize..200) {
            let p = derive(1usize << exp, d, l, Mode::Dense);
            let b = bounds(&p, 1);
            prop_assert_eq!(b.regime == Regime::II, l as f64 >= 4.0 * p.gamma);
        }
    }
}
