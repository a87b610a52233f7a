//! Sequence ingest, normalization, phantom synthesis, and heat-matrix
//! construction.
//!
//! The binary container format (`.thsq`) is: magic `THSQ`, version u16,
//! M u32, N u32, tau u32, mask-presence flags u8 (bit 0 = ROI, bit 1 =
//! marker), then tau frames of little-endian f32 row-major, then the
//! present masks as one byte per pixel (0/1). All integers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"THSQ";
const VERSION: u16 = 1;

/// Binary pixel mask over an M x N grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), rows * cols, "mask data length mismatch");
        Mask { rows, cols, data }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Mask::new(rows, cols, vec![false; rows * cols])
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = value;
    }

    /// True when no pixel is set.
    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Row-major (row, col) coordinates of set pixels.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn disjoint_with(&self, other: &Mask) -> bool {
        self.data
            .iter()
            .zip(other.data.iter())
            .all(|(&a, &b)| !(a && b))
    }

    pub fn as_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn from_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Self {
        Mask::new(rows, cols, bytes.iter().map(|&b| b != 0).collect())
    }
}

/// A dynamic thermal acquisition: tau frames of M x N temperatures plus
/// ROI and reference-marker masks.
#[derive(Debug, Clone)]
pub struct ThermalSequence {
    pub height: usize,
    pub width: usize,
    pub frames: Vec<DMatrix<f64>>,
    pub roi: Mask,
    pub marker: Mask,
    /// Normalization descriptor, set by `normalize_by_reference`.
    pub normalization: Option<String>,
}

impl ThermalSequence {
    pub fn new(
        frames: Vec<DMatrix<f64>>,
        roi: Mask,
        marker: Mask,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::MalformedContainer("zero frames".into()));
        }
        let (m, n) = (frames[0].nrows(), frames[0].ncols());
        if m == 0 || n == 0 {
            return Err(Error::MalformedContainer("empty frame".into()));
        }
        for (t, f) in frames.iter().enumerate() {
            if f.nrows() != m || f.ncols() != n {
                return Err(Error::ShapeMismatch {
                    index: t,
                    got_rows: f.nrows(),
                    got_cols: f.ncols(),
                    want_rows: m,
                    want_cols: n,
                });
            }
            for r in 0..m {
                for c in 0..n {
                    if !f[(r, c)].is_finite() {
                        return Err(Error::NonFinite { frame: t, row: r, col: c });
                    }
                }
            }
        }
        if roi.rows != m || roi.cols != n || marker.rows != m || marker.cols != n {
            return Err(Error::MaskConflict("mask shape differs from frames".into()));
        }
        if !roi.is_empty() && !marker.is_empty() && !roi.disjoint_with(&marker) {
            return Err(Error::MaskConflict("roi and marker masks overlap".into()));
        }
        Ok(ThermalSequence {
            height: m,
            width: n,
            frames,
            roi,
            marker,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Pixels-by-frames matrix: column t is the row-major vectorization of
/// frame t, values in [0, 1] after normalization.
#[derive(Debug, Clone)]
pub struct HeatMatrix {
    pub data: DMatrix<f64>,
    pub height: usize,
    pub width: usize,
    pub provenance: String,
}

impl HeatMatrix {
    /// Number of pixels (rows).
    pub fn pixels(&self) -> usize {
        self.data.nrows()
    }

    /// Number of frames (columns).
    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    /// Reassemble frame `t` from its column.
    pub fn unvectorize(&self, t: usize) -> DMatrix<f64> {
        let mut frame = DMatrix::zeros(self.height, self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                frame[(r, c)] = self.data[(r * self.width + c, t)];
            }
        }
        frame
    }
}

/// Parameters for a synthetic phantom cohort member.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub label: PhantomLabel,
    pub hotspot_count: usize,
    pub hotspot_amplitude: f64,
    pub hotspot_sigma: f64,
    pub flicker_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PhantomLabel {
    Healthy,
    Abnormal,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        // Desk-scale geometry: 32x32 pixels, 23-frame stream.
        PhantomSpec {
            height: 32,
            width: 32,
            frames: 23,
            label: PhantomLabel::Healthy,
            hotspot_count: 0,
            hotspot_amplitude: 0.0,
            hotspot_sigma: 2.5,
            flicker_amplitude: 0.3,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::PhantomSpec("zero dimension".into()));
        }
        if self.hotspot_sigma <= 0.0 {
            return Err(Error::PhantomSpec("hotspot_sigma must be > 0".into()));
        }
        if self.hotspot_amplitude < 0.0 || self.flicker_amplitude < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::PhantomSpec("amplitudes must be >= 0".into()));
        }
        let active = self.hotspot_count > 0 && self.hotspot_amplitude > 0.0;
        match self.label {
            PhantomLabel::Healthy if active => Err(Error::PhantomSpec(
                "healthy phantom cannot carry active hotspots".into(),
            )),
            PhantomLabel::Abnormal if !active => Err(Error::PhantomSpec(
                "abnormal phantom needs hotspot_count > 0 and hotspot_amplitude > 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Load a sequence from a `.thsq` container file or a directory of
/// per-frame CSV matrices (`frame_0000.csv`, ... plus optional
/// `roi.csv` / `marker.csv`).
pub fn load_sequence(path: &Path) -> Result<ThermalSequence> {
    if path.is_dir() {
        load_csv_dir(path)
    } else {
        load_container(path)
    }
}

fn load_container(path: &Path) -> Result<ThermalSequence> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedContainer("bad magic bytes".into()));
    }
    let version = read_u16(&mut reader)?;
    if version != VERSION {
        return Err(Error::MalformedContainer(format!(
            "unsupported version {version}"
        )));
    }
    let m = read_u32(&mut reader)? as usize;
    let n = read_u32(&mut reader)? as usize;
    let tau = read_u32(&mut reader)? as usize;
    let mut flags = [0u8; 1];
    reader.read_exact(&mut flags)?;
    if m == 0 || n == 0 || tau == 0 {
        return Err(Error::MalformedContainer("zero dimension in header".into()));
    }

    let mut frames = Vec::with_capacity(tau);
    let mut buf = vec![0u8; m * n * 4];
    for _ in 0..tau {
        reader.read_exact(&mut buf)?;
        let mut frame = DMatrix::zeros(m, n);
        for r in 0..m {
            for c in 0..n {
                let off = (r * n + c) * 4;
                let bits = [buf[off], buf[off + 1], buf[off + 2], buf[off + 3]];
                frame[(r, c)] = f32::from_le_bytes(bits) as f64;
            }
        }
        frames.push(frame);
    }

    let mut read_mask = |present: bool| -> Result<Mask> {
        if present {
            let mut mbuf = vec![0u8; m * n];
            reader.read_exact(&mut mbuf)?;
            Ok(Mask::from_bytes(m, n, &mbuf))
        } else {
            Ok(Mask::empty(m, n))
        }
    };
    let roi = read_mask(flags[0] & 1 != 0)?;
    let marker = read_mask(flags[0] & 2 != 0)?;

    ThermalSequence::new(frames, roi, marker)
}

fn load_csv_dir(dir: &Path) -> Result<ThermalSequence> {
    let mut frame_files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .map(|f| f.starts_with("frame_") && f.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    frame_files.sort();
    if frame_files.is_empty() {
        return Err(Error::MalformedContainer(format!(
            "no frame_*.csv files in {}",
            dir.display()
        )));
    }

    let frames = frame_files
        .iter()
        .map(|p| read_csv_matrix(p))
        .collect::<Result<Vec<_>>>()?;
    let (m, n) = (frames[0].nrows(), frames[0].ncols());

    let load_mask = |name: &str| -> Result<Mask> {
        let p = dir.join(name);
        if p.exists() {
            let mat = read_csv_matrix(&p)?;
            if mat.nrows() != m || mat.ncols() != n {
                return Err(Error::MaskConflict(format!("{name} shape mismatch")));
            }
            let mut mask = Mask::empty(m, n);
            for r in 0..m {
                for c in 0..n {
                    mask.set(r, c, mat[(r, c)] != 0.0);
                }
            }
            Ok(mask)
        } else {
            Ok(Mask::empty(m, n))
        }
    };
    let roi = load_mask("roi.csv")?;
    let marker = load_mask("marker.csv")?;
    ThermalSequence::new(frames, roi, marker)
}

fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::MalformedContainer(format!(
                        "bad number {tok:?} in {}",
                        path.display()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedContainer(format!("empty csv {}", path.display())));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::MalformedContainer(format!(
            "ragged csv {}",
            path.display()
        )));
    }
    let m = rows.len();
    Ok(DMatrix::from_fn(m, n, |r, c| rows[r][c]))
}

/// Write a sequence as a `.thsq` container.
pub fn save_sequence(seq: &ThermalSequence, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(seq.height as u32).to_le_bytes())?;
    w.write_all(&(seq.width as u32).to_le_bytes())?;
    w.write_all(&(seq.len() as u32).to_le_bytes())?;
    let mut flags = 0u8;
    if !seq.roi.is_empty() {
        flags |= 1;
    }
    if !seq.marker.is_empty() {
        flags |= 2;
    }
    w.write_all(&[flags])?;
    for frame in &seq.frames {
        for r in 0..seq.height {
            for c in 0..seq.width {
                w.write_all(&(frame[(r, c)] as f32).to_le_bytes())?;
            }
        }
    }
    if flags & 1 != 0 {
        w.write_all(&seq.roi.as_bytes())?;
    }
    if flags & 2 != 0 {
        w.write_all(&seq.marker.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reference-marker normalization: subtract each frame's marker-region
/// mean, then min-max scale the whole sequence to [0, 1]. Without a
/// marker only the global min-max is applied. A constant sequence maps
/// to all zeros.
pub fn normalize_by_reference(seq: &ThermalSequence) -> ThermalSequence {
    let marker_px = seq.marker.indices();
    let mut frames: Vec<DMatrix<f64>> = Vec::with_capacity(seq.len());
    for frame in &seq.frames {
        let mut f = frame.clone();
        if !marker_px.is_empty() {
            let mean: f64 = marker_px.iter().map(|&(r, c)| frame[(r, c)]).sum::<f64>()
                / marker_px.len() as f64;
            f.apply(|v| *v -= mean);
        }
        frames.push(f);
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in &frames {
        for v in f.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let range = hi - lo;
    for f in &mut frames {
        if range > 0.0 {
            f.apply(|v| *v = (*v - lo) / range);
        } else {
            f.apply(|v| *v = 0.0);
        }
    }

    let method = if marker_px.is_empty() {
        format!("global-minmax(min={lo}, max={hi})")
    } else {
        format!("marker-mean-subtract+global-minmax(min={lo}, max={hi})")
    };
    ThermalSequence {
        height: seq.height,
        width: seq.width,
        frames,
        roi: seq.roi.clone(),
        marker: seq.marker.clone(),
        normalization: Some(method),
    }
}

/// Stack the sequence into the (M*N) x tau heat matrix; column t is the
/// row-major vectorization of frame t.
pub fn build_heat_matrix(seq: &ThermalSequence) -> Result<HeatMatrix> {
    let pixels = seq.height * seq.width;
    let tau = seq.len();
    if tau > pixels {
        return Err(Error::WideMatrix { pixels, frames: tau });
    }
    let mut data = DMatrix::zeros(pixels, tau);
    for (t, frame) in seq.frames.iter().enumerate() {
        for r in 0..seq.height {
            for c in 0..seq.width {
                data[(r * seq.width + c, t)] = frame[(r, c)];
            }
        }
    }
    Ok(HeatMatrix {
        data,
        height: seq.height,
        width: seq.width,
        provenance: seq
            .normalization
            .clone()
            .unwrap_or_else(|| "unnormalized".into()),
    })
}

/// Synthesize a phantom sequence: smooth background gradient plus white
/// noise, and for abnormal specs a set of Gaussian hotspots whose
/// amplitude oscillates over the stream. ROI covers the central 80% of
/// the image; the marker is a small corner patch held at a fixed value.
///
/// Deterministic in `spec.seed`. Hotspot placement uses a separate
/// stream derived from the seed, so a zero-amplitude spec reproduces
/// the matching healthy phantom frame for frame.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<ThermalSequence> {
    spec.validate()?;
    let (m, n, tau) = (spec.height, spec.width, spec.frames);

    // ROI: central 80% box.
    let r0 = (m as f64 * 0.1).round() as usize;
    let r1 = (m as f64 * 0.9).round() as usize;
    let c0 = (n as f64 * 0.1).round() as usize;
    let c1 = (n as f64 * 0.9).round() as usize;
    let mut roi = Mask::empty(m, n);
    for r in r0..r1 {
        for c in c0..c1 {
            roi.set(r, c, true);
        }
    }

    // Marker: a small patch in the top-left corner, outside the ROI.
    let patch = (m.min(n) / 10).max(1).min(r0.max(1));
    let mut marker = Mask::empty(m, n);
    for r in 0..patch {
        for c in 0..patch {
            marker.set(r, c, true);
        }
    }

    if spec.hotspot_count > 0 {
        let fit = 2.0 * spec.hotspot_sigma;
        if fit >= (r1 - r0) as f64 || fit >= (c1 - c0) as f64 {
            return Err(Error::PhantomSpec(format!(
                "hotspot sigma {} too large for {}x{} roi",
                spec.hotspot_sigma,
                r1 - r0,
                c1 - c0
            )));
        }
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spot_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Hotspot geometry from the dedicated stream.
    let mut spots = Vec::with_capacity(spec.hotspot_count);
    for _ in 0..spec.hotspot_count {
        let cr = spot_rng.gen_range(r0 as f64 + spec.hotspot_sigma..r1 as f64 - spec.hotspot_sigma);
        let cc = spot_rng.gen_range(c0 as f64 + spec.hotspot_sigma..c1 as f64 - spec.hotspot_sigma);
        let phase = spot_rng.gen_range(0.0..std::f64::consts::TAU);
        spots.push((cr, cc, phase));
    }

    let base = 30.0;
    let marker_px = marker.indices();
    let mut frames = Vec::with_capacity(tau);
    for t in 0..tau {
        let mut frame = DMatrix::from_fn(m, n, |r, c| {
            let gr = if m > 1 { r as f64 / (m - 1) as f64 } else { 0.0 };
            let gc = if n > 1 { c as f64 / (n - 1) as f64 } else { 0.0 };
            base + 2.0 * gr + 1.0 * gc
        });
        if spec.hotspot_amplitude > 0.0 {
            for &(cr, cc, phase) in &spots {
                let osc = 1.0
                    + spec.flicker_amplitude
                        * (std::f64::consts::TAU * t as f64 / tau as f64 + phase).sin();
                let amp = spec.hotspot_amplitude * osc;
                let s2 = 2.0 * spec.hotspot_sigma * spec.hotspot_sigma;
                for r in 0..m {
                    for c in 0..n {
                        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                        frame[(r, c)] += amp * (-d2 / s2).exp();
                    }
                }
            }
        }
        if spec.noise_sigma > 0.0 {
            for r in 0..m {
                for c in 0..n {
                    frame[(r, c)] += spec.noise_sigma * normal.sample(&mut noise_rng);
                }
            }
        }
        // Marker held at a fixed reference temperature.
        for &(r, c) in &marker_px {
            frame[(r, c)] = 25.0;
        }
        frames.push(frame);
    }

    ThermalSequence::new(frames, roi, marker)
}

/// Spatial variance of the mean frame over the ROI; used as the
/// phantom separability statistic.
pub fn roi_spatial_variance(seq: &ThermalSequence) -> f64 {
    let px = seq.roi.indices();
    if px.is_empty() {
        return 0.0;
    }
    let tau = seq.len() as f64;
    let vals: Vec<f64> = px
        .iter()
        .map(|&(r, c)| seq.frames.iter().map(|f| f[(r, c)]).sum::<f64>() / tau)
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_seq() -> ThermalSequence {
        let frames = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]),
            DMatrix::from_row_slice(2, 2, &[9.0, 10.0, 11.0, 12.0]),
        ];
        ThermalSequence::new(frames, Mask::empty(2, 2), Mask::empty(2, 2)).unwrap()
    }

    #[test]
    fn container_round_trip_preserves_frames() {
        let seq = tiny_seq();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.thsq");
        save_sequence(&seq, &path).unwrap();
        let loaded = load_sequence(&path).unwrap();
        assert_eq!(loaded.height, 2);
        assert_eq!(loaded.width, 2);
        assert_eq!(loaded.len(), 3);
        for (a, b) in loaded.frames.iter().zip(seq.frames.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let frames = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_row_slice(3, 2, &[1.0; 6]),
        ];
        let err = ThermalSequence::new(frames, Mask::empty(2, 2), Mask::empty(2, 2));
        assert!(matches!(err, Err(Error::ShapeMismatch { index: 1, .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let frames = vec![DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 3.0, 4.0])];
        let err = ThermalSequence::new(frames, Mask::empty(2, 2), Mask::empty(2, 2));
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn csv_dir_loads_in_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("frame_0000.csv"), "1,2\n3,4\n").unwrap();
        std::fs::write(dir.path().join("frame_0001.csv"), "5,6\n7,8\n").unwrap();
        std::fs::write(dir.path().join("roi.csv"), "1,1\n1,1\n").unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.frames[1][(0, 0)], 5.0);
        assert_eq!(seq.roi.count(), 4);
    }

    #[test]
    fn normalize_cancels_constant_shift() {
        let mut marker = Mask::empty(2, 2);
        marker.set(0, 0, true);
        let f = DMatrix::from_row_slice(2, 2, &[30.0, 31.0, 32.0, 33.0]);
        let g = f.map(|v| v + 4.5);
        let seq = ThermalSequence::new(vec![f, g], Mask::empty(2, 2), marker).unwrap();
        let norm = normalize_by_reference(&seq);
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(
                    norm.frames[0][(r, c)],
                    norm.frames[1][(r, c)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn normalize_constant_sequence_is_zero() {
        let f = DMatrix::from_element(2, 2, 5.0);
        let seq =
            ThermalSequence::new(vec![f.clone(), f], Mask::empty(2, 2), Mask::empty(2, 2))
                .unwrap();
        let norm = normalize_by_reference(&seq);
        assert!(norm.frames.iter().all(|f| f.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn normalize_two_step_hand_case() {
        // Marker mean 30.0, remaining values 30.5 and 31.0 -> after
        // subtraction 0.5 / 1.0, after min-max (with the marker pixel at
        // 0.0 being the global min) 0.5 and 1.0.
        let mut marker = Mask::empty(1, 3);
        marker.set(0, 0, true);
        let f = DMatrix::from_row_slice(1, 3, &[30.0, 30.5, 31.0]);
        let seq = ThermalSequence::new(vec![f], Mask::empty(1, 3), marker).unwrap();
        let norm = normalize_by_reference(&seq);
        assert_abs_diff_eq!(norm.frames[0][(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(norm.frames[0][(0, 2)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let spec = PhantomSpec {
            seed: 11,
            ..PhantomSpec::default()
        };
        let seq = generate_phantom(&spec).unwrap();
        let once = normalize_by_reference(&seq);
        let twice = normalize_by_reference(&once);
        for (a, b) in once.frames.iter().zip(twice.frames.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn heat_matrix_layout() {
        let seq = tiny_seq();
        let hm = build_heat_matrix(&seq).unwrap();
        assert_eq!(hm.data.nrows(), 4);
        assert_eq!(hm.data.ncols(), 3);
        let col0: Vec<f64> = hm.data.column(0).iter().copied().collect();
        assert_eq!(col0, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn heat_matrix_single_frame() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let seq = ThermalSequence::new(vec![f], Mask::empty(2, 2), Mask::empty(2, 2)).unwrap();
        let hm = build_heat_matrix(&seq).unwrap();
        assert_eq!(hm.data.ncols(), 1);
        assert_eq!(hm.data[(2, 0)], 3.0);
    }

    #[test]
    fn wide_matrix_rejected() {
        let frames = (0..5)
            .map(|t| DMatrix::from_element(2, 2, t as f64))
            .collect();
        let seq = ThermalSequence::new(frames, Mask::empty(2, 2), Mask::empty(2, 2)).unwrap();
        assert!(matches!(
            build_heat_matrix(&seq),
            Err(Error::WideMatrix { .. })
        ));
    }

    #[test]
    fn vectorization_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<DMatrix<f64>> = (0..6)
            .map(|_| DMatrix::from_fn(5, 4, |_, _| rng.gen::<f64>()))
            .collect();
        let seq =
            ThermalSequence::new(frames.clone(), Mask::empty(5, 4), Mask::empty(5, 4)).unwrap();
        let hm = build_heat_matrix(&seq).unwrap();
        for t in 0..6 {
            assert_eq!(hm.unvectorize(t), frames[t]);
        }
    }

    #[test]
    fn phantom_deterministic() {
        let spec = PhantomSpec {
            label: PhantomLabel::Abnormal,
            hotspot_count: 2,
            hotspot_amplitude: 2.0,
            seed: 99,
            ..PhantomSpec::default()
        };
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        for (fa, fb) in a.frames.iter().zip(b.frames.iter()) {
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn zero_amplitude_matches_healthy() {
        // Bypass validate() on purpose: the zero-amplitude forcing must
        // reproduce the healthy phantom frame for frame.
        let healthy = PhantomSpec {
            seed: 5,
            ..PhantomSpec::default()
        };
        let mut forced = healthy.clone();
        forced.hotspot_count = 3;
        forced.hotspot_amplitude = 0.0;
        let a = generate_phantom(&healthy).unwrap();
        // validate() rejects the inconsistent label, so label stays healthy
        // while hotspots are present but silent.
        let b = generate_phantom(&forced).unwrap();
        for (fa, fb) in a.frames.iter().zip(b.frames.iter()) {
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn oversized_hotspot_rejected() {
        let spec = PhantomSpec {
            label: PhantomLabel::Abnormal,
            hotspot_count: 1,
            hotspot_amplitude: 1.0,
            hotspot_sigma: 40.0,
            ..PhantomSpec::default()
        };
        assert!(matches!(
            generate_phantom(&spec),
            Err(Error::PhantomSpec(_))
        ));
    }

    #[test]
    fn abnormal_phantoms_have_higher_roi_variance() {
        let mut healthy_sum = 0.0;
        let mut abnormal_sum = 0.0;
        for seed in 0..50u64 {
            let h = generate_phantom(&PhantomSpec {
                seed,
                ..PhantomSpec::default()
            })
            .unwrap();
            let a = generate_phantom(&PhantomSpec {
                label: PhantomLabel::Abnormal,
                hotspot_count: 2,
                hotspot_amplitude: 2.0,
                seed,
                ..PhantomSpec::default()
            })
            .unwrap();
            healthy_sum += roi_spatial_variance(&h);
            abnormal_sum += roi_spatial_variance(&a);
        }
        assert!(
            abnormal_sum / 50.0 > healthy_sum / 50.0,
            "abnormal {} <= healthy {}",
            abnormal_sum / 50.0,
            healthy_sum / 50.0
        );
    }

    #[test]
    fn roi_and_marker_disjoint() {
        let seq = generate_phantom(&PhantomSpec::default()).unwrap();
        assert!(seq.roi.disjoint_with(&seq.marker));
        assert!(!seq.roi.is_empty());
        assert!(!seq.marker.is_empty());
    }
}
