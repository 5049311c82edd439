//! Daily VAR on bond-yield changes and stock returns, and identification of
//! growth, monetary, common-premium and hedging-premium shocks by Cholesky
//! factorization plus sign-restricted rotations.
//!
//! Variables are ordered `dy2, dy5, dy10, dlogS` throughout.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_date, ShockKind, ShockPanel};
use crate::seed;

pub const VARIABLES: [&str; 4] = ["dy2", "dy5", "dy10", "dlogS"];

const DY2: usize = 0;
const DY10: usize = 2;

/// Daily changes in 2/5/10-year yields and log stock index.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPanel {
    pub dates: Vec<NaiveDate>,
    /// `days x 4`.
    pub y: DMatrix<f64>,
}

impl MarketPanel {
    pub fn new(dates: Vec<NaiveDate>, y: DMatrix<f64>) -> Result<Self> {
        if y.ncols() != 4 {
            return Err(Error::input(format!("market panel needs 4 columns, got {}", y.ncols())));
        }
        if y.nrows() != dates.len() {
            return Err(Error::input("market panel row count differs from date count"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("market dates must be strictly increasing"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("market panel contains non-finite values"));
        }
        Ok(MarketPanel { dates, y })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Read `date,dy2,dy5,dy10,dlogS`, columns keyed by header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::input(format!("market table is missing column `{name}`")))
        };
        let date_col = col("date")?;
        let cols: Vec<usize> = VARIABLES.iter().map(|v| col(v)).collect::<Result<_>>()?;
        let mut dates = Vec::new();
        let mut data = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            dates.push(parse_date(rec.get(date_col).unwrap_or("")).map_err(|e| Error::input(format!("row {row}: {e}")))?);
            for (k, &c) in cols.iter().enumerate() {
                let cell = rec.get(c).unwrap_or("");
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::input(format!("row {row}: bad {} value `{cell}`", VARIABLES[k])))?;
                if !v.is_finite() {
                    return Err(Error::input(format!("row {row}: non-finite {} value", VARIABLES[k])));
                }
                data.push(v);
            }
        }
        let n = dates.len();
        MarketPanel::new(dates, DMatrix::from_row_slice(n, 4, &data))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        MarketPanel::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date"];
        header.extend(VARIABLES);
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend((0..4).map(|k| self.y[(i, k)].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<market output>", e))?;
        Ok(())
    }
}

/// Reduced-form VAR fit.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub lag: usize,
    pub intercept: Vector4<f64>,
    /// `coeffs[j]` multiplies `y[t-j-1]`.
    pub coeffs: Vec<Matrix4<f64>>,
    /// `(days - L) x 4`.
    pub residuals: DMatrix<f64>,
    pub residual_dates: Vec<NaiveDate>,
    pub sigma: Matrix4<f64>,
}

impl VarModel {
    /// Moving-average matrices `Psi_0 = I, .., Psi_h` of the VAR.
    pub fn ma_matrices(&self, horizon: usize) -> Vec<Matrix4<f64>> {
        let mut psi = vec![Matrix4::identity()];
        for h in 1..=horizon {
            let mut m = Matrix4::zeros();
            for j in 1..=h.min(self.lag) {
                m += self.coeffs[j - 1] * psi[h - j];
            }
            psi.push(m);
        }
        psi
    }
}

/// Equation-by-equation least squares of `y_t` on an intercept and `L` lags.
pub fn fit_var(panel: &MarketPanel, lag: usize) -> Result<VarModel> {
    if lag == 0 {
        return Err(Error::input("VAR lag order must be at least 1"));
    }
    let n = panel.len();
    if n <= 4 * lag + 8 {
        return Err(Error::input(format!("{n} observations are too few for a VAR({lag})")));
    }
    let m = n - lag;
    let k = 1 + 4 * lag;
    let z = DMatrix::from_fn(m, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let j = (c - 1) / 4 + 1;
            panel.y[(r + lag - j, (c - 1) % 4)]
        }
    });
    let y = panel.y.rows(lag, m).into_owned();

    let svd = z.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > smax * 1e-10) {
        return Err(Error::numerical(format!(
            "VAR regressor matrix is rank deficient (condition {:.3e})",
            smax / smin
        )));
    }
    let b = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::numerical(format!("VAR least squares failed: {e}")))?;
    let residuals = &y - &z * &b;
    let sigma_dyn = residuals.transpose() * &residuals / m as f64;
    let sigma = Matrix4::from_fn(|i, j| 0.5 * (sigma_dyn[(i, j)] + sigma_dyn[(j, i)]));

    let intercept = Vector4::from_fn(|i, _| b[(0, i)]);
    let coeffs = (0..lag)
        .map(|j| Matrix4::from_fn(|eq, var| b[(1 + 4 * j + var, eq)]))
        .collect();
    Ok(VarModel {
        lag,
        intercept,
        coeffs,
        residuals,
        residual_dates: panel.dates[lag..].to_vec(),
        sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaturityOrder {
    /// `|response of dy2| > |response of dy10|`.
    ShortDominant,
    /// `|response of dy10| > |response of dy2|`.
    LongDominant,
    Free,
}

impl MaturityOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            MaturityOrder::ShortDominant => "short_dominant",
            MaturityOrder::LongDominant => "long_dominant",
            MaturityOrder::Free => "free",
        }
    }

    fn holds(self, column: &Vector4<f64>) -> bool {
        match self {
            MaturityOrder::ShortDominant => column[DY2].abs() > column[DY10].abs(),
            MaturityOrder::LongDominant => column[DY10].abs() > column[DY2].abs(),
            MaturityOrder::Free => true,
        }
    }
}

impl FromStr for MaturityOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "short_dominant" => Ok(MaturityOrder::ShortDominant),
            "long_dominant" => Ok(MaturityOrder::LongDominant),
            "free" | "" => Ok(MaturityOrder::Free),
            other => Err(Error::input(format!("unknown maturity order `{other}`"))),
        }
    }
}

impl fmt::Display for MaturityOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign pattern of impulse responses, one column per shock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignRestrictions {
    /// `signs[variable][shock]` in {-1, 0, +1}.
    pub signs: [[i8; 4]; 4],
    pub maturity_order: [MaturityOrder; 4],
}

impl Default for SignRestrictions {
    fn default() -> Self {
        // columns: growth, monetary, common premium, hedging premium
        SignRestrictions {
            signs: [
                [1, 1, -1, 0],  // dy2
                [1, 1, -1, 1],  // dy5
                [0, 0, -1, 1],  // dy10
                [1, -1, -1, -1], // dlogS
            ],
            maturity_order: [
                MaturityOrder::ShortDominant,
                MaturityOrder::ShortDominant,
                MaturityOrder::LongDominant,
                MaturityOrder::LongDominant,
            ],
        }
    }
}

impl SignRestrictions {
    pub fn new(signs: [[i8; 4]; 4], maturity_order: [MaturityOrder; 4]) -> Result<Self> {
        if signs.iter().flatten().any(|s| !(-1..=1).contains(s)) {
            return Err(Error::input("sign entries must be -1, 0 or +1"));
        }
        for shock in 0..4 {
            if (0..4).filter(|&v| signs[v][shock] != 0).count() < 2 {
                return Err(Error::input(format!(
                    "shock {} needs at least two sign restrictions",
                    ShockKind::ALL[shock]
                )));
            }
        }
        Ok(SignRestrictions { signs, maturity_order })
    }

    fn column(&self, shock: usize) -> [i8; 4] {
        [0, 1, 2, 3].map(|v| self.signs[v][shock])
    }

    /// Flip `column` so its largest-magnitude restricted entry has the required
    /// sign, then check every restriction. Returns the sign flip applied.
    fn admit(&self, shock: usize, impact: &Vector4<f64>, later: &[Vector4<f64>]) -> Option<f64> {
        let pattern = self.column(shock);
        let lead = (0..4)
            .filter(|&v| pattern[v] != 0)
            .max_by(|&a, &b| impact[a].abs().total_cmp(&impact[b].abs()))?;
        let flip = if impact[lead] * f64::from(pattern[lead]) >= 0.0 { 1.0 } else { -1.0 };
        let satisfied = |col: &Vector4<f64>| {
            (0..4).all(|v| pattern[v] == 0 || flip * col[v] * f64::from(pattern[v]) > 0.0)
        };
        (satisfied(impact) && later.iter().all(satisfied) && self.maturity_order[shock].holds(impact)).then_some(flip)
    }

    /// Read a restriction table with header `shock,dy2,dy5,dy10,dlogS,maturity`
    /// and one row per shock; entries are `+`, `-` or `0`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::input(format!("restriction table is missing column `{name}`")))
        };
        let shock_col = col("shock")?;
        let var_cols: Vec<usize> = VARIABLES.iter().map(|v| col(v)).collect::<Result<_>>()?;
        let maturity_col = headers.iter().position(|h| h == "maturity");
        let mut signs = [[0i8; 4]; 4];
        let mut maturity = [MaturityOrder::Free; 4];
        let mut seen = [false; 4];
        for rec in rdr.records() {
            let rec = rec?;
            let shock: ShockKind = rec.get(shock_col).unwrap_or("").parse()?;
            let s = shock.index();
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::input(format!("conflicting restriction rows for shock {shock}")));
            }
            for (v, &c) in var_cols.iter().enumerate() {
                signs[v][s] = match rec.get(c).unwrap_or("") {
                    "+" | "+1" | "1" => 1,
                    "-" | "-1" => -1,
                    "0" | "" => 0,
                    other => return Err(Error::input(format!("bad sign `{other}` for {shock}/{}", VARIABLES[v]))),
                };
            }
            if let Some(mc) = maturity_col {
                maturity[s] = rec.get(mc).unwrap_or("").parse()?;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("restriction table lacks shock {}", ShockKind::ALL[missing])));
        }
        SignRestrictions::new(signs, maturity)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SignRestrictions::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["shock", "dy2", "dy5", "dy10", "dlogS", "maturity"])?;
        for (s, kind) in ShockKind::ALL.iter().enumerate() {
            let mut row = vec![kind.as_str().to_string()];
            row.extend((0..4).map(|v| match self.signs[v][s] {
                1 => "+".to_string(),
                -1 => "-".to_string(),
                _ => "0".to_string(),
            }));
            row.push(self.maturity_order[s].as_str().to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<restrictions output>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSelection {
    /// Lowest-index draw that satisfies every restriction.
    #[default]
    First,
    /// Element-wise median of all admissible impact matrices over the budget,
    /// projected back onto an orthonormal rotation.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub budget: usize,
    pub seed: u64,
    /// Impulse-response horizons `0..=horizon` are checked.
    pub horizon: usize,
    pub selection: RotationSelection,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions {
            budget: 10_000,
            seed: 0,
            horizon: 0,
            selection: RotationSelection::First,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralFactors {
    /// Lower-triangular Cholesky factor of the residual covariance.
    pub p: Matrix4<f64>,
    /// Orthonormal rotation; column `k` belongs to `ShockKind::ALL[k]`.
    pub q: Matrix4<f64>,
    /// `(days - L) x 4` rotated shocks.
    pub shocks: DMatrix<f64>,
    pub dates: Vec<NaiveDate>,
    pub draws_tried: usize,
    pub draws_accepted: usize,
    pub seed: u64,
}

impl StructuralFactors {
    pub fn impact(&self) -> Matrix4<f64> {
        self.p * self.q
    }

    pub fn to_shock_panel(&self) -> Result<ShockPanel> {
        let values = [0, 1, 2, 3].map(|k| self.shocks.column(k).iter().copied().collect());
        ShockPanel::new(self.dates.clone(), values)
    }
}

/// Haar-distributed orthonormal matrix from a per-draw seed.
fn draw_rotation(seed: u64) -> Matrix4<f64> {
    let mut rng = seed::rng(seed);
    let z = Matrix4::from_fn(|_, _| StandardNormal.sample(&mut rng));
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for k in 0..4 {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Column permutations of 0..4 in lexicographic order.
fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| (0..4).filter(|&j| p[j] == i).count() == 1) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Try to assign the rotated columns to shocks. Returns the rotation with
/// columns reordered and sign-normalized.
fn admissible(
    restrictions: &SignRestrictions,
    p: &Matrix4<f64>,
    q: &Matrix4<f64>,
    psi: &[Matrix4<f64>],
    perms: &[[usize; 4]],
) -> Option<Matrix4<f64>> {
    let impact = p * q;
    let responses: Vec<Matrix4<f64>> = psi.iter().skip(1).map(|m| m * impact).collect();
    'perm: for perm in perms {
        let mut flips = [1.0; 4];
        for shock in 0..4 {
            let c = perm[shock];
            let later: Vec<Vector4<f64>> = responses.iter().map(|r| r.column(c).into_owned()).collect();
            match restrictions.admit(shock, &impact.column(c).into_owned(), &later) {
                Some(f) => flips[shock] = f,
                None => continue 'perm,
            }
        }
        return Some(Matrix4::from_fn(|i, shock| flips[shock] * q[(i, perm[shock])]));
    }
    None
}

fn nearest_rotation(m: &Matrix4<f64>) -> Matrix4<f64> {
    let svd = m.svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Identify structural shocks from a fitted VAR.
///
/// Draws rotations with seeds derived from `opts.seed` and the draw index, so
/// the accepted draw does not depend on how evaluation is scheduled.
pub fn identify_shocks(
    model: &VarModel,
    restrictions: &SignRestrictions,
    opts: &IdentifyOptions,
) -> Result<StructuralFactors> {
    if opts.budget == 0 {
        return Err(Error::config("rotation budget must be at least 1"));
    }
    let p = model
        .sigma
        .cholesky()
        .ok_or_else(|| Error::numerical("residual covariance is not positive definite"))?
        .l();
    let psi = model.ma_matrices(opts.horizon);
    let perms = permutations();
    let check = |i: usize| admissible(restrictions, &p, &draw_rotation(seed::derive(opts.seed, i as u64)), &psi, &perms);

    let (q, tried, accepted) = match opts.selection {
        RotationSelection::First => {
            let found = (0..opts.budget).into_par_iter().find_map_first(|i| check(i).map(|q| (i, q)));
            match found {
                Some((i, q)) => (q, i + 1, 1),
                None => return Err(no_draw(opts.budget)),
            }
        }
        RotationSelection::Median => {
            let rotations: Vec<Matrix4<f64>> = (0..opts.budget).into_par_iter().filter_map(check).collect();
            if rotations.is_empty() {
                return Err(no_draw(opts.budget));
            }
            let impacts: Vec<Matrix4<f64>> = rotations.iter().map(|q| p * q).collect();
            let median = Matrix4::from_fn(|i, j| {
                let mut v: Vec<f64> = impacts.iter().map(|m| m[(i, j)]).collect();
                v.sort_by(f64::total_cmp);
                let mid = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[mid]
                } else {
                    0.5 * (v[mid - 1] + v[mid])
                }
            });
            let p_inv = p
                .try_inverse()
                .ok_or_else(|| Error::numerical("Cholesky factor is singular"))?;
            (nearest_rotation(&(p_inv * median)), opts.budget, rotations.len())
        }
    };

    let impact = p * q;
    let lu = impact.lu();
    let m = model.residuals.nrows();
    let mut shocks = DMatrix::zeros(m, 4);
    for t in 0..m {
        let u: Vector4<f64> = Vector4::from_fn(|i, _| model.residuals[(t, i)]);
        let e = lu
            .solve(&u)
            .ok_or_else(|| Error::numerical("structural impact matrix is singular"))?;
        shocks.set_row(t, &e.transpose());
    }
    Ok(StructuralFactors {
        p,
        q,
        shocks,
        dates: model.residual_dates.clone(),
        draws_tried: tried,
        draws_accepted: accepted,
        seed: opts.seed,
    })
}

fn no_draw(budget: usize) -> Error {
    Error::numerical(format!(
        "no rotation among {budget} draws satisfied the sign restrictions; \
         the restrictions may be inconsistent with the residual covariance"
    ))
}

/// Sample correlation of two equally long columns.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Column of a dynamic matrix as a vector.
pub fn column(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    DVector::from(m.column(k)).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn panel_from(rows: Vec<[f64; 4]>) -> MarketPanel {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates = start.iter_days().take(rows.len()).collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        MarketPanel::new(dates, DMatrix::from_row_slice(rows.len(), 4, &flat)).unwrap()
    }

    fn simulate(n: usize, a: f64, seed: u64) -> MarketPanel {
        let mut rng = seed::rng(seed);
        let mut prev = [0.0; 4];
        let rows = (0..n)
            .map(|_| {
                let next = [0, 1, 2, 3].map(|k| a * prev[k] + rng.sample::<f64, _>(StandardNormal));
                prev = next;
                next
            })
            .collect();
        panel_from(rows)
    }

    #[test]
    fn recovers_diagonal_ar() {
        let m = fit_var(&simulate(5000, 0.5, 1), 1).unwrap();
        for i in 0..4 {
            assert!((m.coeffs[0][(i, i)] - 0.5).abs() < 0.05, "{}", m.coeffs[0]);
        }
        for c in 0..4 {
            assert!(m.residuals.column(c).mean().abs() < 1e-8);
        }
        assert!((m.sigma - m.sigma.transpose()).abs().max() < 1e-10);
    }

    #[test]
    fn white_noise_has_small_coefficients() {
        let m = fit_var(&simulate(5000, 0.0, 2), 1).unwrap();
        assert!(m.coeffs[0].abs().max() < 0.05, "{}", m.coeffs[0]);
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        let mut p = simulate(200, 0.2, 3);
        p.y.column_mut(1).fill(0.25);
        assert!(matches!(fit_var(&p, 2), Err(Error::Numerical(_))));
        assert!(fit_var(&p, 0).is_err());
        assert!(fit_var(&simulate(20, 0.2, 3), 5).is_err());
    }

    fn identity_model() -> VarModel {
        let mut rng = seed::rng(9);
        let residuals = DMatrix::from_fn(50, 4, |_, _| rng.sample(StandardNormal));
        VarModel {
            lag: 1,
            intercept: Vector4::zeros(),
            coeffs: vec![Matrix4::zeros()],
            residuals,
            residual_dates: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().iter_days().take(50).collect(),
            sigma: Matrix4::identity(),
        }
    }

    #[test]
    fn identity_covariance_identity_pattern() {
        let mut signs = [[0i8; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                signs[i][j] = if i == j { 1 } else { 0 };
            }
        }
        // Every shock needs two restrictions; pair each with a negative neighbour.
        for j in 0..4 {
            signs[(j + 1) % 4][j] = -1;
        }
        let r = SignRestrictions::new(signs, [MaturityOrder::Free; 4]).unwrap();
        let model = identity_model();
        let f = identify_shocks(&model, &r, &IdentifyOptions { seed: 5, ..Default::default() }).unwrap();
        let impact = f.impact();
        for i in 0..4 {
            for j in 0..4 {
                match r.signs[i][j] {
                    1 => assert!(impact[(i, j)] > 0.0),
                    -1 => assert!(impact[(i, j)] < 0.0),
                    _ => {}
                }
            }
        }
        assert!((f.p - Matrix4::identity()).abs().max() < 1e-12);
        // shocks are an orthonormal transform of u: norms per row preserved
        for t in 0..model.residuals.nrows() {
            let a = model.residuals.row(t).norm();
            let b = f.shocks.row(t).norm();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn impossible_restrictions_exhaust_budget() {
        // Orthonormal columns cannot all be strictly positive.
        let r = SignRestrictions::new([[1; 4]; 4], [MaturityOrder::Free; 4]).unwrap();
        for budget in [1, 500] {
            let err = identify_shocks(&identity_model(), &r, &IdentifyOptions { budget, ..Default::default() });
            assert!(matches!(err, Err(Error::Numerical(ref m)) if m.contains(&budget.to_string())));
        }
    }

    #[test]
    fn deterministic_identification() {
        let model = fit_var(&simulate(600, 0.1, 4), 1).unwrap();
        let r = SignRestrictions::new(
            [[1, 1, 1, 1], [1, -1, 1, -1], [0, 0, -1, 1], [0, 0, 0, 0]],
            [MaturityOrder::Free; 4],
        )
        .unwrap();
        let opts = IdentifyOptions { seed: 11, ..Default::default() };
        let a = identify_shocks(&model, &r, &opts).unwrap();
        let b = identify_shocks(&model, &r, &opts).unwrap();
        assert_eq!(a, b);
        assert!((a.q * a.q.transpose() - Matrix4::identity()).abs().max() < 1e-8);
    }

    #[test]
    fn restriction_table_round_trip() {
        let r = SignRestrictions::default();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(SignRestrictions::read_csv(buf.as_slice()).unwrap(), r);

        let dup = "shock,dy2,dy5,dy10,dlogS,maturity\ngrowth,+,+,0,+,free\ngrowth,-,+,0,+,free\n";
        assert!(SignRestrictions::read_csv(dup.as_bytes()).is_err());
    }

    #[test]
    fn ma_matrices_of_var1_are_powers() {
        let mut m = identity_model();
        m.coeffs = vec![Matrix4::from_diagonal_element(0.5)];
        let psi = m.ma_matrices(3);
        assert!((psi[3] - Matrix4::from_diagonal_element(0.125)).abs().max() < 1e-15);
    }
}
