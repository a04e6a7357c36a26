//! Input/output data records, Hankel matrices, persistency of excitation,
//! and SVD-based dimension reduction.
//!
//! Signals here are scalar (one torque input, one angle output). A Hankel
//! matrix of depth `L` built from a length-`T` signal has `L` rows and
//! `T − L + 1` columns, with entry `(i, j) = signal[i + j]`. The stacked
//! data matrix orders its blocks as `(U_p, U_f, Y_p, Y_f)` so that its rows
//! align with the constraint vector `(u_ini, u, y_ini, y)`.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions.
const RANK_TOL: f64 = 1e-10;

/// Synchronized input/output record: `y[k]` is the measured output after
/// `u[k]` is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Sample period (s).
    pub dt: f64,
}

impl Trajectory {
    pub fn new(u: Vec<f64>, y: Vec<f64>, dt: f64) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension(format!(
                "input and output lengths differ: {} vs {}",
                u.len(),
                y.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::Dimension("trajectory must have at least one sample".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self { u, y, dt })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Serialize as CSV with header `t,u,y` (sample k at t = k·dt).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,y\n");
        for k in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", k as f64 * self.dt, self.u[k], self.y[k]));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse the `t,u,y` CSV format produced by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config { line: None, message: "empty trajectory file".into() })?;
        if header.1.trim() != "t,u,y" {
            return Err(Error::Config {
                line: Some(1),
                message: format!("expected header 't,u,y', got '{}'", header.1.trim()),
            });
        }
        let mut t = Vec::new();
        let mut u = Vec::new();
        let mut y = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Config {
                    line: Some(i + 1),
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Config {
                    line: Some(i + 1),
                    message: format!("not a number: '{s}'"),
                })
            };
            t.push(parse(fields[0])?);
            u.push(parse(fields[1])?);
            y.push(parse(fields[2])?);
        }
        let dt = if t.len() >= 2 { t[1] - t[0] } else { 1.0 };
        Trajectory::new(u, y, dt)
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Hankel matrix of the given depth: `L` rows, `T − L + 1` columns,
/// entry `(i, j) = signal[i + j]`.
pub fn build_hankel(signal: &[f64], depth: usize) -> Result<DMatrix<f64>> {
    let t = signal.len();
    if depth == 0 {
        return Err(Error::Dimension("hankel depth must be >= 1".into()));
    }
    if depth > t {
        return Err(Error::Dimension(format!(
            "hankel depth {depth} exceeds signal length {t}"
        )));
    }
    let cols = t - depth + 1;
    Ok(DMatrix::from_fn(depth, cols, |i, j| signal[i + j]))
}

/// Why a persistency-of-excitation check failed.
#[derive(Debug, Clone, PartialEq)]
pub enum PeFailure {
    /// The signal is too short for the requested order: fewer columns than
    /// rows, so full row rank is impossible.
    WindowTooLong { needed: usize, actual: usize },
    /// The Hankel matrix is rank deficient.
    RankDeficient { rank: usize, required: usize },
}

/// Outcome of a persistency-of-excitation check.
#[derive(Debug, Clone, PartialEq)]
pub struct PeReport {
    pub excited: bool,
    pub failure: Option<PeFailure>,
}

/// Detailed persistency-of-excitation check of the given order.
///
/// The signal is persistently exciting of order `L` when its depth-`L`
/// Hankel matrix has full row rank (singular values above
/// `1e-10 · σ_max`). A signal shorter than `2L − 1` cannot be exciting and
/// is reported distinctly from a rank failure.
pub fn persistency_report(signal: &[f64], order: usize) -> Result<PeReport> {
    if order == 0 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    let t = signal.len();
    if order > t || t - order + 1 < order {
        return Ok(PeReport {
            excited: false,
            failure: Some(PeFailure::WindowTooLong {
                needed: 2 * order - 1,
                actual: t,
            }),
        });
    }
    let h = build_hankel(signal, order)?;
    let rank = numerical_rank(&h);
    if rank == order {
        Ok(PeReport { excited: true, failure: None })
    } else {
        Ok(PeReport {
            excited: false,
            failure: Some(PeFailure::RankDeficient { rank, required: order }),
        })
    }
}

/// Boolean persistency-of-excitation check; see [`persistency_report`].
pub fn is_persistently_exciting(signal: &[f64], order: usize) -> bool {
    persistency_report(signal, order).map(|r| r.excited).unwrap_or(false)
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// The four stacked data blocks `(U_p, U_f, Y_p, Y_f)`.
#[derive(Debug, Clone)]
pub struct HankelSystem {
    pub up: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    pub yf: DMatrix<f64>,
    /// Past window length.
    pub t_ini: usize,
    /// Future (prediction) window length.
    pub horizon: usize,
    /// Input dimension (scalar signals here).
    pub m: usize,
    /// Output dimension.
    pub p: usize,
}

impl HankelSystem {
    /// Total depth L = t_ini + horizon.
    pub fn depth(&self) -> usize {
        self.t_ini + self.horizon
    }

    /// Number of columns (T − L + 1).
    pub fn n_cols(&self) -> usize {
        self.uf.ncols()
    }

    /// The stacked matrix with rows ordered (U_p, U_f, Y_p, Y_f).
    pub fn stacked(&self) -> DMatrix<f64> {
        let rows = 2 * self.depth();
        let cols = self.n_cols();
        let mut s = DMatrix::zeros(rows, cols);
        let mut r = 0;
        for block in [&self.up, &self.uf, &self.yp, &self.yf] {
            s.view_mut((r, 0), (block.nrows(), cols)).copy_from(block);
            r += block.nrows();
        }
        s
    }
}

/// Split a trajectory's Hankel matrices into past and future blocks:
/// `U_p` holds the first `t_ini` rows of the depth-`L` input Hankel matrix
/// and `U_f` the remaining `horizon` rows; likewise for the outputs.
pub fn split_past_future(traj: &Trajectory, t_ini: usize, horizon: usize) -> Result<HankelSystem> {
    let depth = t_ini + horizon;
    if depth == 0 {
        return Err(Error::Dimension("t_ini + horizon must be >= 1".into()));
    }
    if depth > traj.len() {
        return Err(Error::Dimension(format!(
            "window t_ini + horizon = {depth} exceeds data length {}",
            traj.len()
        )));
    }
    let hu = build_hankel(&traj.u, depth)?;
    let hy = build_hankel(&traj.y, depth)?;
    Ok(HankelSystem {
        up: hu.rows(0, t_ini).into_owned(),
        uf: hu.rows(t_ini, horizon).into_owned(),
        yp: hy.rows(0, t_ini).into_owned(),
        yf: hy.rows(t_ini, horizon).into_owned(),
        t_ini,
        horizon,
        m: 1,
        p: 1,
    })
}

/// Rule for picking the retained rank in [`svd_reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Largest multiplicative gap in the singular-value distribution, with
    /// fallback to the full row count when no gap reaches 10x.
    TurningPoint,
    /// Keep exactly this many singular directions.
    Fixed(usize),
}

/// Reduced data matrix `H̄ = W₁ Σ₁` with the same row layout as the
/// stacked `(U_p, U_f, Y_p, Y_f)` matrix it came from.
#[derive(Debug, Clone)]
pub struct ReducedHankel {
    pub h_bar: DMatrix<f64>,
    /// Retained singular-direction count r.
    pub rank: usize,
    /// Full descending singular-value list of the stacked matrix.
    pub singular_values: Vec<f64>,
    pub t_ini: usize,
    pub horizon: usize,
    pub m: usize,
    pub p: usize,
}

impl ReducedHankel {
    pub fn depth(&self) -> usize {
        self.t_ini + self.horizon
    }
}

/// Rank from the turning point of a descending singular-value list: the
/// index maximizing σ_i/σ_{i+1}, falling back to the full length when the
/// best gap is below 10x (near-full-rank data).
pub fn choose_rank(singular_values: &[f64]) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(Error::Dimension("empty singular value list".into()));
    }
    let max_sv = singular_values[0];
    let noise = RANK_TOL * max_sv;
    let mut best_ratio = 0.0;
    let mut best_idx = singular_values.len();
    for i in 0..singular_values.len() - 1 {
        let hi = singular_values[i];
        if hi <= noise {
            // Into the numerical-zero tail; gaps below here are meaningless.
            break;
        }
        let lo = singular_values[i + 1].max(noise * 1e-6);
        let ratio = hi / lo;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_idx = i + 1;
        }
    }
    if best_ratio < 10.0 {
        Ok(singular_values.len())
    } else {
        Ok(best_idx)
    }
}

/// SVD-based reduction of the stacked data matrix: `H̄ = W₁ Σ₁`, keeping
/// `r` singular directions per the rank rule.
pub fn svd_reduce(hs: &HankelSystem, rule: RankRule) -> Result<ReducedHankel> {
    let stacked = hs.stacked();
    if stacked.is_empty() {
        return Err(Error::Dimension("stacked data matrix is empty".into()));
    }
    let svd = SVD::new(stacked.clone(), true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD did not produce left singular vectors".into()))?;
    let singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let max_rank = singular_values.len();
    let rank = match rule {
        RankRule::TurningPoint => choose_rank(&singular_values)?,
        RankRule::Fixed(r) => {
            if r == 0 || r > max_rank {
                return Err(Error::Dimension(format!(
                    "fixed rank {r} outside 1..={max_rank}"
                )));
            }
            r
        }
    };
    let mut h_bar = u.columns(0, rank).into_owned();
    for (j, mut col) in h_bar.column_iter_mut().enumerate() {
        col *= singular_values[j];
    }
    Ok(ReducedHankel {
        h_bar,
        rank,
        singular_values,
        t_ini: hs.t_ini,
        horizon: hs.horizon,
        m: hs.m,
        p: hs.p,
    })
}
