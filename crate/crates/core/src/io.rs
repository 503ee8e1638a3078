//! File formats: the binary matrix container, timetag streams, CSV tables
//! and PGM heatmaps.
//!
//! Every format carries a version. Binary files store it in the header;
//! CSV files written here start with a `# bst-<kind> v<N>` comment line.
//! Readers reject versions they do not know and accept CSV files without a
//! version line.

use crate::grid::{FrequencyGrid, GridError};
use crate::hom::{stage_position_to_delay, CurveKind, HomCurve, HomError};
use crate::jsa::{JsaError, JsaMatrix, JsiMatrix};
use crate::tofs::{Histogram2D, TimetagEvent, WavelengthAxis, WavelengthJsi};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::{Read, Seek, SeekFrom, Write};
use thiserror::Error;

pub const MATRIX_MAGIC: [u8; 4] = *b"BJSA";
pub const MATRIX_VERSION: u32 = 1;
pub const MATRIX_HEADER_LEN: usize = 64;
pub const TIMETAG_MAGIC: [u8; 4] = *b"BTTG";
pub const TIMETAG_VERSION: u32 = 1;
pub const TIMETAG_HEADER_LEN: usize = 24;
pub const TIMETAG_RECORD_LEN: usize = 9;
pub const CSV_VERSION: u32 = 1;

const FLAG_NORMALIZED: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a {expected} file (magic {found:?})")]
    BadMagic {
        expected: &'static str,
        found: [u8; 4],
    },
    #[error("unsupported {format} version {found} (this build reads {supported})")]
    UnsupportedVersion {
        format: &'static str,
        found: u32,
        supported: u32,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Jsa(#[from] JsaError),
    #[error(transparent)]
    Hom(#[from] HomError),
}

impl FormatError {
    /// True for errors caused by the file's content rather than by I/O.
    pub fn is_content_error(&self) -> bool {
        !matches!(self, FormatError::Io(_))
    }
}

fn malformed(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

/// What a matrix container holds and how its axis parameters read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixPayload {
    /// Complex amplitudes; axes `[center1, span1, center2, span2]` in nm.
    Jsa,
    /// Intensities on frequency grids, axes as for `Jsa`.
    JsiFrequency,
    /// Intensity densities on uniform wavelength bins; axes
    /// `[start1, width1, start2, width2]` in nm.
    JsiWavelength,
    /// Coincidence counts; axes `[origin1, width, origin2, width]` in ps.
    Histogram,
    /// Schmidt modes as columns; rows follow the grid in `axes[0..2]`.
    Modes,
    /// Complex amplitudes on uniform wavelength bins, axes as for
    /// `JsiWavelength`.
    JsaWavelength,
}

impl MatrixPayload {
    fn code(self) -> u32 {
        match self {
            Self::Jsa => 0,
            Self::JsiFrequency => 1,
            Self::JsiWavelength => 2,
            Self::Histogram => 3,
            Self::Modes => 4,
            Self::JsaWavelength => 5,
        }
    }

    fn from_code(c: u32) -> Option<Self> {
        Some(match c {
            0 => Self::Jsa,
            1 => Self::JsiFrequency,
            2 => Self::JsiWavelength,
            3 => Self::Histogram,
            4 => Self::Modes,
            5 => Self::JsaWavelength,
            _ => return None,
        })
    }
}

/// Contents of a `BJSA` container.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub payload: MatrixPayload,
    pub axes: [f64; 4],
    pub normalized: bool,
    pub data: DMatrix<Complex64>,
}

impl MatrixFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FormatError> {
        let (n1, n2) = self.data.shape();
        let mut header = Vec::with_capacity(MATRIX_HEADER_LEN);
        header.extend_from_slice(&MATRIX_MAGIC);
        header.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        header.extend_from_slice(&(n1 as u32).to_le_bytes());
        header.extend_from_slice(&(n2 as u32).to_le_bytes());
        for a in self.axes {
            header.extend_from_slice(&a.to_le_bytes());
        }
        let flags = if self.normalized { FLAG_NORMALIZED } else { 0 };
        header.extend_from_slice(&flags.to_le_bytes());
        header.extend_from_slice(&self.payload.code().to_le_bytes());
        header.resize(MATRIX_HEADER_LEN, 0);
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(n1 * n2 * 16);
        for i in 0..n1 {
            for j in 0..n2 {
                let z = self.data[(i, j)];
                body.extend_from_slice(&z.re.to_le_bytes());
                body.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&body)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FormatError> {
        let mut h = [0u8; MATRIX_HEADER_LEN];
        r.read_exact(&mut h)?;
        let magic: [u8; 4] = h[0..4].try_into().unwrap();
        if magic != MATRIX_MAGIC {
            return Err(FormatError::BadMagic {
                expected: "BJSA",
                found: magic,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != MATRIX_VERSION {
            return Err(FormatError::UnsupportedVersion {
                format: "BJSA",
                found: version,
                supported: MATRIX_VERSION,
            });
        }
        let (n1, n2) = (u32_at(8) as usize, u32_at(12) as usize);
        let axes = [f64_at(16), f64_at(24), f64_at(32), f64_at(40)];
        let flags = u32_at(48);
        let payload = MatrixPayload::from_code(u32_at(52))
            .ok_or_else(|| FormatError::Invalid(format!("unknown payload code {}", u32_at(52))))?;
        let mut body = vec![0u8; n1 * n2 * 16];
        r.read_exact(&mut body)?;
        let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
        let data = DMatrix::from_fn(n1, n2, |i, j| {
            let k = 2 * (i * n2 + j);
            Complex64::new(f(k), f(k + 1))
        });
        Ok(Self {
            payload,
            axes,
            normalized: flags & FLAG_NORMALIZED != 0,
            data,
        })
    }

    fn expect(self, payload: MatrixPayload) -> Result<Self, FormatError> {
        if self.payload != payload {
            return Err(FormatError::Invalid(format!(
                "expected a {payload:?} container, found {:?}",
                self.payload
            )));
        }
        Ok(self)
    }
}

fn grid_axes(g1: &FrequencyGrid, g2: &FrequencyGrid) -> [f64; 4] {
    [
        g1.center_wavelength(),
        g1.span(),
        g2.center_wavelength(),
        g2.span(),
    ]
}

fn grids_from_axes(
    axes: [f64; 4],
    n1: usize,
    n2: usize,
) -> Result<(FrequencyGrid, FrequencyGrid), FormatError> {
    Ok((
        FrequencyGrid::new(axes[0], axes[1], n1)?,
        FrequencyGrid::new(axes[2], axes[3], n2)?,
    ))
}

fn real_part(data: &DMatrix<Complex64>) -> Result<DMatrix<f64>, FormatError> {
    if data.iter().any(|z| z.im != 0.0) {
        return Err(FormatError::Invalid(
            "real payload has imaginary entries".into(),
        ));
    }
    Ok(data.map(|z| z.re))
}

pub fn write_jsa<W: Write>(jsa: &JsaMatrix, w: W) -> Result<(), FormatError> {
    MatrixFile {
        payload: MatrixPayload::Jsa,
        axes: grid_axes(jsa.grid1(), jsa.grid2()),
        normalized: jsa.is_normalized(),
        data: jsa.amplitudes().clone(),
    }
    .write_to(w)
}

pub fn read_jsa<R: Read>(r: R) -> Result<JsaMatrix, FormatError> {
    let f = MatrixFile::read_from(r)?.expect(MatrixPayload::Jsa)?;
    let (g1, g2) = grids_from_axes(f.axes, f.data.nrows(), f.data.ncols())?;
    Ok(JsaMatrix::new(g1, g2, f.data)?)
}

pub fn write_jsi<W: Write>(jsi: &JsiMatrix, w: W) -> Result<(), FormatError> {
    MatrixFile {
        payload: MatrixPayload::JsiFrequency,
        axes: grid_axes(jsi.grid1(), jsi.grid2()),
        normalized: false,
        data: jsi.values().map(|v| Complex64::new(v, 0.0)),
    }
    .write_to(w)
}

pub fn read_jsi<R: Read>(r: R) -> Result<JsiMatrix, FormatError> {
    let f = MatrixFile::read_from(r)?.expect(MatrixPayload::JsiFrequency)?;
    let (g1, g2) = grids_from_axes(f.axes, f.data.nrows(), f.data.ncols())?;
    Ok(JsiMatrix::new(g1, g2, real_part(&f.data)?)?)
}

pub fn write_wavelength_jsi<W: Write>(jsi: &WavelengthJsi, w: W) -> Result<(), FormatError> {
    MatrixFile {
        payload: MatrixPayload::JsiWavelength,
        axes: [
            jsi.axis1.start,
            jsi.axis1.width,
            jsi.axis2.start,
            jsi.axis2.width,
        ],
        normalized: false,
        data: jsi.density.map(|v| Complex64::new(v, 0.0)),
    }
    .write_to(w)
}

pub fn read_wavelength_jsi<R: Read>(r: R) -> Result<WavelengthJsi, FormatError> {
    let f = MatrixFile::read_from(r)?.expect(MatrixPayload::JsiWavelength)?;
    let (n1, n2) = f.data.shape();
    Ok(WavelengthJsi {
        axis1: WavelengthAxis {
            start: f.axes[0],
            width: f.axes[1],
            bins: n1,
        },
        axis2: WavelengthAxis {
            start: f.axes[2],
            width: f.axes[3],
            bins: n2,
        },
        density: real_part(&f.data)?,
    })
}

/// Stores the counts only; coincidence bookkeeping is not part of the file.
pub fn write_histogram<W: Write>(h: &Histogram2D, w: W) -> Result<(), FormatError> {
    MatrixFile {
        payload: MatrixPayload::Histogram,
        axes: [
            h.spec.origin[0],
            h.spec.bin_width,
            h.spec.origin[1],
            h.spec.bin_width,
        ],
        normalized: false,
        data: h.counts.map(|c| Complex64::new(c as f64, 0.0)),
    }
    .write_to(w)
}

pub fn read_histogram<R: Read>(r: R) -> Result<Histogram2D, FormatError> {
    let f = MatrixFile::read_from(r)?.expect(MatrixPayload::Histogram)?;
    let (n1, n2) = f.data.shape();
    if n1 != n2 || f.axes[1] != f.axes[3] {
        return Err(FormatError::Invalid(
            "histogram must be square with equal bin widths".into(),
        ));
    }
    let vals = real_part(&f.data)?;
    if vals.iter().any(|&v| !(v >= 0.0) || v.fract() != 0.0) {
        return Err(FormatError::Invalid(
            "histogram counts must be non-negative integers".into(),
        ));
    }
    let mut h = Histogram2D::empty(crate::tofs::HistogramSpec {
        bins: n1,
        bin_width: f.axes[1],
        origin: [f.axes[0], f.axes[2]],
    });
    h.counts = vals.map(|v| v as u64);
    h.stats.in_range = h.counts.iter().sum();
    Ok(h)
}

/// Schmidt modes of one photon as matrix columns.
pub fn write_modes<W: Write>(
    grid: &FrequencyGrid,
    modes: &DMatrix<Complex64>,
    w: W,
) -> Result<(), FormatError> {
    MatrixFile {
        payload: MatrixPayload::Modes,
        axes: [grid.center_wavelength(), grid.span(), 0.0, 0.0],
        normalized: false,
        data: modes.clone(),
    }
    .write_to(w)
}

/// Binary timetag stream: header followed by `(u8 channel, u64 tick)`
/// records, little-endian.
pub fn write_timetags<W: Write>(
    events: &[TimetagEvent],
    resolution_ps: f64,
    mut w: W,
) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(TIMETAG_HEADER_LEN + events.len() * TIMETAG_RECORD_LEN);
    buf.extend_from_slice(&TIMETAG_MAGIC);
    buf.extend_from_slice(&TIMETAG_VERSION.to_le_bytes());
    buf.extend_from_slice(&resolution_ps.to_le_bytes());
    buf.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for e in events {
        buf.push(e.channel);
        buf.extend_from_slice(&e.tick.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Incremental [`write_timetags`]: the record count is patched into the
/// header on [`TimetagWriter::finish`].
pub struct TimetagWriter<W: Write + Seek> {
    inner: W,
    count: u64,
}

impl<W: Write + Seek> TimetagWriter<W> {
    pub fn new(mut inner: W, resolution_ps: f64) -> Result<Self, FormatError> {
        let mut h = Vec::with_capacity(TIMETAG_HEADER_LEN);
        h.extend_from_slice(&TIMETAG_MAGIC);
        h.extend_from_slice(&TIMETAG_VERSION.to_le_bytes());
        h.extend_from_slice(&resolution_ps.to_le_bytes());
        h.extend_from_slice(&0u64.to_le_bytes());
        inner.write_all(&h)?;
        Ok(Self { inner, count: 0 })
    }

    pub fn write(&mut self, events: &[TimetagEvent]) -> Result<(), FormatError> {
        let mut buf = Vec::with_capacity(events.len() * TIMETAG_RECORD_LEN);
        for e in events {
            buf.push(e.channel);
            buf.extend_from_slice(&e.tick.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.count += events.len() as u64;
        Ok(())
    }

    /// Records written so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<W, FormatError> {
        self.inner.seek(SeekFrom::Start(16))?;
        self.inner.write_all(&self.count.to_le_bytes())?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Returns the events and the tick resolution in ps.
pub fn read_timetags<R: Read>(mut r: R) -> Result<(Vec<TimetagEvent>, f64), FormatError> {
    let mut h = [0u8; TIMETAG_HEADER_LEN];
    r.read_exact(&mut h)?;
    let magic: [u8; 4] = h[0..4].try_into().unwrap();
    if magic != TIMETAG_MAGIC {
        return Err(FormatError::BadMagic {
            expected: "BTTG",
            found: magic,
        });
    }
    let version = u32::from_le_bytes(h[4..8].try_into().unwrap());
    if version != TIMETAG_VERSION {
        return Err(FormatError::UnsupportedVersion {
            format: "BTTG",
            found: version,
            supported: TIMETAG_VERSION,
        });
    }
    let resolution = f64::from_le_bytes(h[8..16].try_into().unwrap());
    let count = u64::from_le_bytes(h[16..24].try_into().unwrap()) as usize;
    let mut body = vec![0u8; count * TIMETAG_RECORD_LEN];
    r.read_exact(&mut body)?;
    let events = body
        .chunks_exact(TIMETAG_RECORD_LEN)
        .map(|c| TimetagEvent {
            channel: c[0],
            tick: u64::from_le_bytes(c[1..9].try_into().unwrap()),
        })
        .collect();
    Ok((events, resolution))
}

fn csv_version_line(kind: &str) -> String {
    format!("# bst-{kind} v{CSV_VERSION}\n")
}

/// Checks `# bst-<kind> v<N>` lines; other comments are ignored.
fn check_version_lines(text: &str, kind: &'static str) -> Result<(), FormatError> {
    for (k, line) in text.lines().enumerate() {
        let no = k + 1;
        let Some(comment) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some(rest) = comment.trim().strip_prefix("bst-") else {
            continue;
        };
        let (found_kind, v) = rest
            .split_once(" v")
            .ok_or_else(|| malformed(no, "bad version line"))?;
        let v: u32 = v
            .trim()
            .parse()
            .map_err(|_| malformed(no, "bad version number"))?;
        if found_kind != kind {
            return Err(malformed(
                no,
                format!("expected a {kind} table, found {found_kind}"),
            ));
        }
        if v != CSV_VERSION {
            return Err(FormatError::UnsupportedVersion {
                format: kind,
                found: v,
                supported: CSV_VERSION,
            });
        }
    }
    Ok(())
}

/// Reads a CSV table: optional version line, one header row, numeric rows.
/// Returns the header and `(line number, fields)` per row.
type Table = (Vec<String>, Vec<(usize, Vec<f64>)>);

fn read_table<R: Read>(mut r: R, kind: &'static str) -> Result<Table, FormatError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    check_version_lines(&text, kind)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        malformed(line, e.to_string())
    };
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(malformed(1, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let no = rec.position().map_or(0, |p| p.line() as usize);
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(no, format!("not a finite number: {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((no, vals));
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn require_column(header: &[String], name: &str) -> Result<usize, FormatError> {
    column(header, name).ok_or_else(|| malformed(1, format!("missing column {name}")))
}

pub fn write_timetags_csv<W: Write>(
    events: &[TimetagEvent],
    resolution_ps: f64,
    mut w: W,
) -> Result<(), FormatError> {
    let mut s = csv_version_line("timetags");
    s.push_str("channel,time_ps\n");
    for e in events {
        s.push_str(&format!(
            "{},{}\n",
            e.channel,
            e.tick as f64 * resolution_ps
        ));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Writes `(position_mm, delay_ps, counts)` rows. Positions are derived
/// from the delays.
pub fn write_hom_csv<W: Write>(curve: &HomCurve, mut w: W) -> Result<(), FormatError> {
    let mut s = csv_version_line("hom");
    let name = match curve.kind {
        CurveKind::Counts => "counts",
        CurveKind::Probability => "probability",
    };
    s.push_str(&format!("position_mm,delay_ps,{name}\n"));
    for (&t, &v) in curve.delays.iter().zip(&curve.values) {
        s.push_str(&format!(
            "{},{},{}\n",
            crate::hom::delay_to_stage_position(t),
            t,
            v
        ));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads an interferogram. `delay_ps` wins over `position_mm` when both are
/// present; a `probability` column yields a probability curve.
pub fn read_hom_csv<R: Read>(r: R) -> Result<HomCurve, FormatError> {
    let (header, rows) = read_table(r, "hom")?;
    let delay_col = column(&header, "delay_ps");
    let pos_col = column(&header, "position_mm");
    let (value_col, kind) = match (column(&header, "counts"), column(&header, "probability")) {
        (Some(c), _) => (c, CurveKind::Counts),
        (None, Some(c)) => (c, CurveKind::Probability),
        _ => return Err(malformed(1, "missing column counts")),
    };
    if delay_col.is_none() && pos_col.is_none() {
        return Err(malformed(1, "missing column delay_ps or position_mm"));
    }
    let mut delays = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut last: Option<f64> = None;
    for (no, row) in &rows {
        let t = match delay_col {
            Some(c) => row[c],
            None => stage_position_to_delay(row[pos_col.unwrap()]),
        };
        if last.is_some_and(|p| !(t > p)) {
            return Err(malformed(*no, "delays must be strictly increasing"));
        }
        if kind == CurveKind::Counts && row[value_col] < 0.0 {
            return Err(malformed(*no, "negative counts"));
        }
        last = Some(t);
        delays.push(t);
        values.push(row[value_col]);
    }
    Ok(HomCurve::new(delays, values, kind)?)
}

/// A value table on a rectangular wavelength lattice, as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthMap {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub values: DMatrix<f64>,
}

pub fn write_map_csv<W: Write>(
    kind: &str,
    value_name: &str,
    lambda1: &[f64],
    lambda2: &[f64],
    values: &DMatrix<f64>,
    mut w: W,
) -> Result<(), FormatError> {
    let mut s = csv_version_line(kind);
    s.push_str(&format!("wavelength1_nm,wavelength2_nm,{value_name}\n"));
    for (i, l1) in lambda1.iter().enumerate() {
        for (j, l2) in lambda2.iter().enumerate() {
            s.push_str(&format!("{l1},{l2},{}\n", values[(i, j)]));
        }
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a row-major `(wavelength1_nm, wavelength2_nm, value)` table.
pub fn read_map_csv<R: Read>(r: R, kind: &'static str) -> Result<WavelengthMap, FormatError> {
    let (header, rows) = read_table(r, kind)?;
    if header.len() != 3 {
        return Err(malformed(
            1,
            "expected wavelength1_nm,wavelength2_nm,<value>",
        ));
    }
    let c1 = require_column(&header, "wavelength1_nm")?;
    let c2 = require_column(&header, "wavelength2_nm")?;
    let cv = 3 - c1 - c2;
    let mut lambda2: Vec<f64> = Vec::new();
    for (_, row) in &rows {
        if lambda2.first() == Some(&row[c2]) {
            break;
        }
        lambda2.push(row[c2]);
    }
    let n2 = lambda2.len();
    if n2 == 0 || rows.len() % n2 != 0 {
        return Err(malformed(1, "rows do not form a rectangular lattice"));
    }
    let n1 = rows.len() / n2;
    let mut lambda1 = Vec::with_capacity(n1);
    let mut values = DMatrix::zeros(n1, n2);
    for (k, (no, row)) in rows.iter().enumerate() {
        let (i, j) = (k / n2, k % n2);
        if j == 0 {
            lambda1.push(row[c1]);
        }
        if row[c1] != lambda1[i] || row[c2] != lambda2[j] {
            return Err(malformed(*no, "row out of lattice order"));
        }
        values[(i, j)] = row[cv];
    }
    Ok(WavelengthMap {
        lambda1,
        lambda2,
        values,
    })
}

/// Lossy JSA export with one row per grid node.
pub fn write_jsa_csv<W: Write>(jsa: &JsaMatrix, mut w: W) -> Result<(), FormatError> {
    let mut s = csv_version_line("jsa");
    s.push_str("wavelength1_nm,wavelength2_nm,re,im\n");
    let (l1, l2) = (jsa.grid1().wavelengths(), jsa.grid2().wavelengths());
    let a = jsa.amplitudes();
    for (i, x) in l1.iter().enumerate() {
        for (j, y) in l2.iter().enumerate() {
            let z = a[(i, j)];
            s.push_str(&format!("{x},{y},{},{}\n", z.re, z.im));
        }
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Sign matrix as integer CSV, one matrix row per line.
pub fn write_sign_csv<W: Write>(signs: &DMatrix<i8>, mut w: W) -> Result<(), FormatError> {
    let mut s = csv_version_line("mask");
    for i in 0..signs.nrows() {
        let row: Vec<String> = signs.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// 8-bit binary PGM (P5), linear in value up to the 99.5th percentile.
pub fn write_pgm<W: Write>(values: &DMatrix<f64>, mut w: W) -> Result<(), FormatError> {
    let (n1, n2) = values.shape();
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let top = if sorted.is_empty() {
        0.0
    } else {
        let k = ((sorted.len() - 1) as f64 * 0.995).round() as usize;
        sorted[k]
    };
    let mut out = format!("P5\n{n2} {n1}\n255\n").into_bytes();
    for i in 0..n1 {
        for j in 0..n2 {
            let v = values[(i, j)];
            let g = if top > 0.0 && v.is_finite() {
                (v / top * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            out.push(g);
        }
    }
    w.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::spectral::StateConfig;
    use crate::tofs::HistogramSpec;

    fn jsa() -> JsaMatrix {
        StateConfig::default()
            .synthesize(&make_grid(1550.0, 36.0, 48).unwrap())
            .unwrap()
            .with_global_phase(0.3)
    }

    #[test]
    fn jsa_container_round_trip() {
        let a = jsa();
        let mut buf = Vec::new();
        write_jsa(&a, &mut buf).unwrap();
        assert_eq!(buf.len(), MATRIX_HEADER_LEN + 48 * 48 * 16);
        assert_eq!(&buf[0..4], b"BJSA");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        let b = read_jsa(buf.as_slice()).unwrap();
        assert_eq!(a, b);
        // row-major, real then imaginary
        let z = a.amplitudes()[(0, 1)];
        let off = MATRIX_HEADER_LEN + 16;
        assert_eq!(
            f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()),
            z.re
        );
    }

    #[test]
    fn container_rejects_bad_input() {
        let mut buf = Vec::new();
        write_jsa(&jsa(), &mut buf).unwrap();
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(
            read_jsa(v2.as_slice()),
            Err(FormatError::UnsupportedVersion { found: 2, .. })
        ));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_jsa(bad.as_slice()),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(read_jsa(&buf[..100]), Err(FormatError::Io(_))));
        assert!(matches!(
            read_jsi(buf.as_slice()),
            Err(FormatError::Invalid(_))
        ));
    }

    #[test]
    fn real_payloads_round_trip() {
        let a = jsa();
        let jsi = JsiMatrix::from_jsa(&a);
        let mut buf = Vec::new();
        write_jsi(&jsi, &mut buf).unwrap();
        assert_eq!(read_jsi(buf.as_slice()).unwrap(), jsi);

        let mut h = Histogram2D::empty(HistogramSpec {
            bins: 4,
            bin_width: 25.0,
            origin: [0.0, 0.0],
        });
        h.counts[(1, 2)] = 7;
        h.stats.in_range = 7;
        let mut buf = Vec::new();
        write_histogram(&h, &mut buf).unwrap();
        let back = read_histogram(buf.as_slice()).unwrap();
        assert_eq!(back.counts, h.counts);
        assert_eq!(back.spec, h.spec);

        let w = WavelengthJsi {
            axis1: WavelengthAxis {
                start: 1530.0,
                width: 0.0625,
                bins: 3,
            },
            axis2: WavelengthAxis {
                start: 1531.0,
                width: 0.0625,
                bins: 2,
            },
            density: DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        };
        let mut buf = Vec::new();
        write_wavelength_jsi(&w, &mut buf).unwrap();
        assert_eq!(read_wavelength_jsi(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn timetags_round_trip() {
        let ev = vec![
            TimetagEvent {
                tick: 5,
                channel: 1,
            },
            TimetagEvent {
                tick: u64::MAX - 1,
                channel: 2,
            },
        ];
        let mut buf = Vec::new();
        write_timetags(&ev, 1.0, &mut buf).unwrap();
        assert_eq!(buf.len(), TIMETAG_HEADER_LEN + 2 * TIMETAG_RECORD_LEN);
        assert_eq!(buf[TIMETAG_HEADER_LEN], 1);
        let (back, res) = read_timetags(buf.as_slice()).unwrap();
        assert_eq!(back, ev);
        assert_eq!(res, 1.0);
        buf[4] = 9;
        assert!(matches!(
            read_timetags(buf.as_slice()),
            Err(FormatError::UnsupportedVersion { .. })
        ));
        buf[4] = 1;
        let mut w = TimetagWriter::new(std::io::Cursor::new(Vec::new()), 1.0).unwrap();
        w.write(&ev[..1]).unwrap();
        w.write(&ev[1..]).unwrap();
        assert_eq!(w.count(), 2);
        assert_eq!(w.finish().unwrap().into_inner(), buf);
        let mut csv = Vec::new();
        write_timetags_csv(&ev[..1], 1.0, &mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "# bst-timetags v1\nchannel,time_ps\n1,5\n"
        );
    }

    #[test]
    fn hom_csv_round_trip_and_errors() {
        let curve = HomCurve::new(
            vec![-1.0, 0.0, 1.5],
            vec![10.0, 3.0, 12.0],
            CurveKind::Counts,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_hom_csv(&curve, &mut buf).unwrap();
        assert_eq!(read_hom_csv(buf.as_slice()).unwrap(), curve);

        let positions = "position_mm,counts\n-0.1,5\n0.0,2\n0.1,5\n";
        let c = read_hom_csv(positions.as_bytes()).unwrap();
        assert!((c.delays[2] - stage_position_to_delay(0.1)).abs() < 1e-12);

        let bad = "delay_ps,counts\n0,1\n1,x\n";
        match read_hom_csv(bad.as_bytes()) {
            Err(FormatError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "delay_ps,counts\n0,1\n1\n";
        assert!(matches!(
            read_hom_csv(short.as_bytes()),
            Err(FormatError::Malformed { line: 3, .. })
        ));
        let future = "# bst-hom v7\ndelay_ps,counts\n0,1\n";
        assert!(matches!(
            read_hom_csv(future.as_bytes()),
            Err(FormatError::UnsupportedVersion { found: 7, .. })
        ));
        let unordered = "delay_ps,counts\n1,1\n0,1\n";
        assert!(matches!(
            read_hom_csv(unordered.as_bytes()),
            Err(FormatError::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn map_csv_round_trip() {
        let a = jsa();
        let jsi = a.jsi();
        let (l1, l2) = (a.grid1().wavelengths(), a.grid2().wavelengths());
        let mut buf = Vec::new();
        write_map_csv("jsi", "intensity", &l1, &l2, &jsi, &mut buf).unwrap();
        let m = read_map_csv(buf.as_slice(), "jsi").unwrap();
        assert_eq!(m.lambda1, l1);
        assert_eq!(m.lambda2, l2);
        assert_eq!(m.values, jsi);
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text
            .lines()
            .take(2 + 48 + 10)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(read_map_csv(cut.as_bytes(), "jsi").is_err());
        assert!(matches!(
            read_map_csv(text.as_bytes(), "mask"),
            Err(FormatError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn pgm_scaling() {
        let mut m = DMatrix::from_fn(20, 10, |i, j| (i * 10 + j) as f64);
        m[(0, 0)] = 1e9;
        let mut buf = Vec::new();
        write_pgm(&m, &mut buf).unwrap();
        let header = b"P5\n10 20\n255\n";
        assert_eq!(&buf[..header.len()], header);
        let px = &buf[header.len()..];
        assert_eq!(px.len(), 200);
        // the outlier saturates instead of crushing the rest
        assert_eq!(px[0], 255);
        assert!(px[100] > 100 && px[100] < 140);
        let mut z = Vec::new();
        write_pgm(&DMatrix::zeros(2, 2), &mut z).unwrap();
        assert!(z.ends_with(&[0, 0, 0, 0]));
    }

    #[test]
    fn sign_csv_layout() {
        let s = DMatrix::from_row_slice(2, 2, &[1i8, -1, -1, 1]);
        let mut buf = Vec::new();
        write_sign_csv(&s, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# bst-mask v1\n1,-1\n-1,1\n"
        );
    }
}
