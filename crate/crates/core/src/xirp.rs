//! Intertemporal return plots.
//!
//! An IRP of a positive series `x` is the `S x S` matrix with entry
//! `(i, j) = ln(x_i / x_j)`. The extended form (XIRP) stores `x_i` on the
//! otherwise-zero diagonal so the series can be read back directly, or
//! rebuilt column by column from the off-diagonal returns.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Lower clamp applied to sampled diagonals before reconstruction.
pub const DIAGONAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum XirpError {
    #[error("non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("non-positive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("start value must be positive, got {0}")]
    NonPositiveStart(f64),
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("malformed xirp file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, XirpError>;

fn check_positive(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, &value)) => Err(XirpError::NonPositiveValue { index, value }),
        None => Ok(()),
    }
}

fn check_square(m: &Array2<f64>) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(XirpError::NonSquare { rows, cols });
    }
    if rows == 0 {
        return Err(XirpError::Empty);
    }
    Ok(rows)
}

/// Pairwise log-return matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Irp(pub Array2<f64>);

/// Pairwise log returns off the diagonal, series values on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Xirp(pub Array2<f64>);

impl Irp {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }
}

impl Xirp {
    pub fn from_matrix(m: Array2<f64>) -> Result<Self> {
        check_square(&m)?;
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diag().to_vec()
    }
}

fn log_ratio_matrix(values: &[f64]) -> Array2<f64> {
    let n = values.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { (values[i] / values[j]).ln() })
}

pub fn encode_irp(values: &[f64]) -> Result<Irp> {
    check_positive(values)?;
    Ok(Irp(log_ratio_matrix(values)))
}

pub fn encode_xirp(values: &[f64]) -> Result<Xirp> {
    check_positive(values)?;
    let mut m = log_ratio_matrix(values);
    for (i, &v) in values.iter().enumerate() {
        m[[i, i]] = v;
    }
    Ok(Xirp(m))
}

/// Reads the series straight off the diagonal.
pub fn decode_diagonal(x: &Array2<f64>) -> Result<Vec<f64>> {
    check_square(x)?;
    Ok(x.diag().to_vec())
}

fn column_variants(m: &Array2<f64>, diag: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { diag[j] } else { diag[j] * m[[i, j]].exp() })
                .collect()
        })
        .collect()
}

/// One reconstruction per column: variant `j` anchors on `x_jj` and applies
/// the returns in column `j`, `s_i = x_jj * exp(R[i, j])`.
pub fn decode_variants(x: &Xirp) -> Result<Vec<Vec<f64>>> {
    let diag = decode_diagonal(&x.0)?;
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(XirpError::NonPositiveDiagonal { index, value });
    }
    Ok(column_variants(&x.0, &diag))
}

fn mean_of(variants: &[Vec<f64>]) -> Vec<f64> {
    let n = variants.len() as f64;
    let mut out = vec![0.0; variants[0].len()];
    for v in variants {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

pub fn decode_average(x: &Xirp) -> Result<Vec<f64>> {
    Ok(mean_of(&decode_variants(x)?))
}

pub fn decode_random(x: &Xirp, seed: u64) -> Result<Vec<f64>> {
    let mut variants = decode_variants(x)?;
    let pick = ChaCha8Rng::seed_from_u64(seed).gen_range(0..variants.len());
    Ok(variants.swap_remove(pick))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    Diagonal,
    #[default]
    Average,
    Random,
}

impl std::str::FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "diagonal" => Ok(DecodeMode::Diagonal),
            "average" => Ok(DecodeMode::Average),
            "random" => Ok(DecodeMode::Random),
            other => Err(format!("unknown decode mode '{other}'")),
        }
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecodeMode::Diagonal => "diagonal",
            DecodeMode::Average => "average",
            DecodeMode::Random => "random",
        })
    }
}

/// Decoded series together with the number of diagonal entries that had
/// to be raised to [`DIAGONAL_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDecode {
    pub values: Vec<f64>,
    pub clamped: usize,
}

/// Decoding for generator output, which may carry non-positive diagonal
/// entries and is not antisymmetric.
pub fn decode_sampled(x: &Xirp, mode: DecodeMode, seed: u64) -> Result<SampledDecode> {
    let mut diag = decode_diagonal(&x.0)?;
    let mut clamped = 0;
    for d in diag.iter_mut() {
        if !(*d >= DIAGONAL_FLOOR) {
            *d = DIAGONAL_FLOOR;
            clamped += 1;
        }
    }
    let values = match mode {
        DecodeMode::Diagonal => diag,
        DecodeMode::Average => mean_of(&column_variants(&x.0, &diag)),
        DecodeMode::Random => {
            let j = ChaCha8Rng::seed_from_u64(seed).gen_range(0..diag.len());
            column_variants(&x.0, &diag).swap_remove(j)
        }
    };
    Ok(SampledDecode { values, clamped })
}

/// Rebuilds a series from an IRP given its first value.
pub fn recover_from_irp(irp: &Irp, x0: f64) -> Result<Vec<f64>> {
    if !(x0 > 0.0) {
        return Err(XirpError::NonPositiveStart(x0));
    }
    check_square(&irp.0)?;
    Ok(irp.0.column(0).iter().map(|r| x0 * r.exp()).collect())
}

/// Min-max map of one partition (diagonal or off-diagonal) onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionScale {
    pub min: f64,
    pub max: f64,
}

impl PartitionScale {
    pub fn fit<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { min, max }
    }

    /// A partition with no spread maps to the constant 0.
    pub fn is_degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    pub fn forward(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            2.0 * (v - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            self.min + (v + 1.0) * (self.max - self.min) / 2.0
        }
    }
}

/// Independent diagonal and off-diagonal scaling, fitted on one or more
/// XIRPs of the same size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XirpScaler {
    pub diag: PartitionScale,
    pub offdiag: PartitionScale,
}

impl XirpScaler {
    pub fn fit<'a, I: IntoIterator<Item = &'a Xirp>>(xirps: I) -> Self {
        let mut diag = Vec::new();
        let mut off = Vec::new();
        for x in xirps {
            for ((i, j), &v) in x.0.indexed_iter() {
                if i == j {
                    diag.push(v);
                } else {
                    off.push(v);
                }
            }
        }
        Self { diag: PartitionScale::fit(diag), offdiag: PartitionScale::fit(off) }
    }

    pub fn scale(&self, x: &Xirp) -> ScaledXirp {
        let m = Array2::from_shape_fn(x.0.dim(), |(i, j)| {
            let v = x.0[[i, j]];
            if i == j {
                self.diag.forward(v)
            } else {
                self.offdiag.forward(v)
            }
        });
        ScaledXirp { matrix: m, scaler: *self }
    }

    /// Attaches this scaler to a raw `[-1, 1]` matrix (e.g. generator output).
    pub fn wrap(&self, matrix: Array2<f64>) -> ScaledXirp {
        ScaledXirp { matrix, scaler: *self }
    }
}

/// XIRP scaled into `[-1, 1]` with separate diagonal/off-diagonal maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledXirp {
    pub matrix: Array2<f64>,
    pub scaler: XirpScaler,
}

impl ScaledXirp {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diag_degenerate(&self) -> bool {
        self.scaler.diag.is_degenerate()
    }

    pub fn offdiag_degenerate(&self) -> bool {
        self.scaler.offdiag.is_degenerate()
    }
}

pub fn scale_xirp(x: &Xirp) -> ScaledXirp {
    XirpScaler::fit([x]).scale(x)
}

pub fn unscale_xirp(sx: &ScaledXirp) -> Xirp {
    let s = sx.scaler;
    Xirp(Array2::from_shape_fn(sx.matrix.dim(), |(i, j)| {
        let v = sx.matrix[[i, j]];
        if i == j {
            s.diag.inverse(v)
        } else {
            s.offdiag.inverse(v)
        }
    }))
}

/// Writes the text format: a `xirp v1 S=<n> diag_scaled=<0|1>` header line
/// followed by `S` comma-separated rows with 17 significant digits.
pub fn write_xirp<W: Write>(mut w: W, matrix: &Array2<f64>, diag_scaled: bool) -> Result<()> {
    let n = check_square(matrix)?;
    writeln!(w, "xirp v1 S={n} diag_scaled={}", u8::from(diag_scaled))?;
    let mut line = String::new();
    for row in matrix.rows() {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            write!(line, "{v:.16e}").expect("string write");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses the text format, returning the matrix and its `diag_scaled` flag.
pub fn read_xirp<R: BufRead>(r: R) -> Result<(Array2<f64>, bool)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| XirpError::Format("missing header".into()))??;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("xirp") || parts.next() != Some("v1") {
        return Err(XirpError::Format(format!("bad header '{header}'")));
    }
    let mut size = None;
    let mut diag_scaled = None;
    for p in parts {
        match p.split_once('=') {
            Some(("S", v)) => size = v.parse::<usize>().ok(),
            Some(("diag_scaled", "0")) => diag_scaled = Some(false),
            Some(("diag_scaled", "1")) => diag_scaled = Some(true),
            _ => return Err(XirpError::Format(format!("bad header field '{p}'"))),
        }
    }
    let (n, diag_scaled) = match (size, diag_scaled) {
        (Some(n), Some(d)) if n > 0 => (n, d),
        _ => return Err(XirpError::Format(format!("incomplete header '{header}'"))),
    };
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let line = lines.next().ok_or_else(|| XirpError::Format(format!("missing row {row}")))??;
        let before = data.len();
        for field in line.split(',') {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| XirpError::Format(format!("bad number '{field}' in row {row}")))?;
            data.push(v);
        }
        if data.len() - before != n {
            return Err(XirpError::Format(format!("row {row} has {} fields, expected {n}", data.len() - before)));
        }
    }
    let m = Array2::from_shape_vec((n, n), data).expect("validated shape");
    Ok((m, diag_scaled))
}
