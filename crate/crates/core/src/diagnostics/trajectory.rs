use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::Termination;
use crate::spectral::{mode_index, SpectralField3, TorusGeometry};

/// Scalar series recorded at every output, in CSV column order (after `t`).
///
/// `*_fluct` are volume norms of `f - <f>`; `l2_psi`, `h2_psi` and `l2_zero`
/// are norms on `[0, L3]` of `psi = d<f>/dy`, `d^2 psi/dy^2` and
/// `<f> - mean(f)`.
pub const SERIES_COLUMNS: [&str; 9] =
    ["l2_fluct", "h2_fluct", "l2_psi", "h2_psi", "linf", "mass", "l2", "h1_fluct", "l2_zero"];

/// Evaluates all `SERIES_COLUMNS` on one state.
pub fn series_of(state: &SpectralField3) -> [f64; 9] {
    let s = state.spectral();
    let g = *s.geometry();
    let [kx1, kx2, ky] = g.wavenumbers();
    let [_, n2, n3] = g.sizes;
    let data = s.data();

    let (mut e0, mut e1, mut e2) = (0.0, 0.0, 0.0);
    for (col, line) in data.chunks(n3).enumerate().skip(1) {
        let (i1, i2) = (col / n2, col % n2);
        let kh = kx1[i1] * kx1[i1] + kx2[i2] * kx2[i2];
        for (i3, c) in line.iter().enumerate() {
            let k2 = kh + ky[i3] * ky[i3];
            let a = c.norm_sqr();
            e0 += a;
            e1 += k2 * a;
            e2 += k2 * k2 * a;
        }
    }
    let (mut z0, mut z2, mut z6) = (0.0, 0.0, 0.0);
    for (i3, c) in data[..n3].iter().enumerate().skip(1) {
        let a = c.norm_sqr();
        z0 += a;
        // psi and its second derivative are odd-order derivatives of <f>.
        if mode_index(i3, n3) != -(n3 as i64) / 2 {
            let k2 = ky[i3] * ky[i3];
            z2 += k2 * a;
            z6 += k2 * k2 * k2 * a;
        }
    }
    let vol = g.volume();
    let l3 = g.lengths[2];
    let mean = data[0].re;
    let total = e0 + z0 + data[0].norm_sqr();
    [
        (vol * e0).sqrt(),
        (vol * e2).sqrt(),
        (l3 * z2).sqrt(),
        (l3 * z6).sqrt(),
        s.linf(),
        mean,
        (vol * total).sqrt(),
        (vol * e1).sqrt(),
        (l3 * z0).sqrt(),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: SpectralField3,
}

/// Output times, named scalar series and optional field snapshots of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub geometry: TorusGeometry,
    pub times: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
    pub snapshots: Vec<Snapshot>,
    pub status: Termination,
    pub final_state: Option<SpectralField3>,
    /// Time step used, when produced by `simulate`.
    pub dt: Option<f64>,
}

impl Trajectory {
    /// Builds a completed trajectory from explicit series, checking that times
    /// increase strictly and that all series have one value per time.
    pub fn from_series(geometry: TorusGeometry, times: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("trajectory times must increase strictly".into()));
        }
        for (name, v) in &columns {
            if v.len() != times.len() {
                return Err(Error::InvalidInput(format!(
                    "series `{name}` has {} values for {} times",
                    v.len(),
                    times.len()
                )));
            }
        }
        Ok(Self {
            geometry,
            times,
            columns,
            snapshots: Vec::new(),
            status: Termination::Completed,
            final_state: None,
            dt: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn series(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    /// Adds or replaces a series.
    pub fn set_series(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::InvalidInput(format!("series `{name}` has the wrong length")));
        }
        match self.columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.columns.push((name.to_string(), values)),
        }
        Ok(())
    }

    /// Writes `t` and every series as CSV with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header).map_err(csv_error)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(self.columns.iter().map(|(_, v)| format!("{:.16e}", v[i])));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by `write_csv`. The grid is not stored in the CSV
    /// and must be supplied.
    pub fn read_csv(path: &Path, geometry: TorusGeometry) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::MissingSeries("t".into()));
        }
        let mut times = Vec::new();
        let mut cols: Vec<(String, Vec<f64>)> = header[1..].iter().map(|h| (h.clone(), Vec::new())).collect();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let parse = |j: usize| -> Result<f64> {
                let s = rec.get(j).unwrap_or("");
                s.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("row {}: cannot parse `{s}` in column `{}`", row + 2, header[j]))
                })
            };
            times.push(parse(0)?);
            for (j, (_, v)) in cols.iter_mut().enumerate() {
                v.push(parse(j + 1)?);
            }
        }
        Self::from_series(geometry, times, cols)
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::InvalidInput(format!("csv: {e}"))
    }
}

/// Accumulates `SERIES_COLUMNS` (and every `snapshot_every`-th state) during
/// a run.
pub struct SeriesRecorder {
    geometry: TorusGeometry,
    snapshot_every: usize,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    snapshots: Vec<Snapshot>,
}

impl SeriesRecorder {
    pub fn new(geometry: TorusGeometry, snapshot_every: usize) -> Self {
        Self {
            geometry,
            snapshot_every,
            times: Vec::new(),
            values: vec![Vec::new(); SERIES_COLUMNS.len()],
            snapshots: Vec::new(),
        }
    }

    pub fn record(&mut self, t: f64, state: &SpectralField3) {
        if self.snapshot_every > 0 && self.times.len() % self.snapshot_every == 0 {
            self.snapshots.push(Snapshot { t, field: state.spectral() });
        }
        self.times.push(t);
        for (v, x) in self.values.iter_mut().zip(series_of(state)) {
            v.push(x);
        }
    }

    pub fn finish(self, status: Termination) -> Trajectory {
        let columns = SERIES_COLUMNS.iter().map(|s| s.to_string()).zip(self.values).collect();
        Trajectory {
            geometry: self.geometry,
            times: self.times,
            columns,
            snapshots: self.snapshots,
            status,
            final_state: None,
            dt: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn series_match_direct_norms() {
        let g = TorusGeometry::new([2.0 * PI, 3.0, 4.0], [8, 8, 16]).unwrap();
        let ky = 2.0 * PI / 4.0;
        let f = SpectralField3::from_fn(g, |x, _, y| 0.5 + x.sin() * (ky * y).cos() + 2.0 * (ky * y).sin());
        let s = series_of(&f);
        let fl = f.fluct();
        assert!((s[0] - fl.l2()).abs() < 1e-12);
        assert!((s[1] - fl.h2dot()).abs() < 1e-12);
        assert!((s[7] - fl.h1dot()).abs() < 1e-12);
        assert!((s[6] - f.l2()).abs() < 1e-12);
        assert!((s[5] - 0.5).abs() < 1e-14);
        // <f> = 0.5 + 2 sin(ky y): psi = 2 ky cos, psi'' = -2 ky^3 cos.
        let l3 = 4.0f64;
        assert!((s[2] - 2.0 * ky * (l3 / 2.0).sqrt()).abs() < 1e-12);
        assert!((s[3] - 2.0 * ky.powi(3) * (l3 / 2.0).sqrt()).abs() < 1e-10);
        assert!((s[8] - 2.0 * (l3 / 2.0).sqrt()).abs() < 1e-12);
        assert!((s[4] - f.linf()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = TorusGeometry::cube(1.0, 4).unwrap();
        let t = Trajectory::from_series(
            g,
            vec![0.0, 0.1, 0.30000000000000004],
            vec![("a".into(), vec![1.0 / 3.0, -2.5e-300, 7.0]), ("b".into(), vec![0.0, 1e10, PI])],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        t.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,a,b\n"));
        let back = Trajectory::read_csv(&p, g).unwrap();
        assert_eq!(back.times, t.times);
        assert_eq!(back.series("a").unwrap(), t.series("a").unwrap());
        assert_eq!(back.series("b").unwrap(), t.series("b").unwrap());
        assert!(matches!(back.series("c"), Err(Error::MissingSeries(_))));
    }

    #[test]
    fn rejects_non_increasing_times() {
        let g = TorusGeometry::cube(1.0, 4).unwrap();
        assert!(Trajectory::from_series(g, vec![0.0, 0.0], vec![]).is_err());
        assert!(Trajectory::from_series(g, vec![0.0, 1.0], vec![("a".into(), vec![1.0])]).is_err());
    }
}
