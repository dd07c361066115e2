//! Plain-text file formats.
//!
//! Every file starts with `#` header lines of the form `# key value`,
//! followed by whitespace-separated data rows. Floating-point values are
//! written with 17 significant digits so that they read back bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Axis, Baffle};
use crate::sim::{CaseResult, FieldGrid, GridSpec, SweetSpotMetrics};
use crate::special::sh_index;
use crate::spherical::SphericalCoeffs;
use crate::spheroidal::{index_a, index_b, SpheroidalCoeffs};
use crate::swf::{PrecisionMode, SwfContext, SwfTable};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Parsed {
    kind: String,
    header: BTreeMap<String, String>,
    rows: Vec<Vec<String>>,
}

impl Parsed {
    fn get(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::parse(format!("{} file is missing header `{key}`", self.kind)))
    }

    fn get_f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.get(key)?, key)
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        parse_usize(self.get(key)?, key)
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::parse(format!("`{s}` is not a number (field {what})")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(format!("`{s}` is not a nonnegative integer (field {what})")))
}

fn parse_i64(s: &str, what: &str) -> Result<i64> {
    s.parse()
        .map_err(|_| Error::parse(format!("`{s}` is not an integer (field {what})")))
}

fn parse_text(text: &str, kind: &str) -> Result<Parsed> {
    let mut lines = text.lines();
    let title = lines.next().unwrap_or_default();
    if title.trim() != format!("# {kind}") {
        return Err(Error::parse(format!("expected a `{kind}` file, found first line `{title}`")));
    }
    let mut header = BTreeMap::new();
    let mut rows = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if let (Some(k), Some(v)) = (it.next(), it.next()) {
                header.insert(k.to_string(), v.to_string());
            }
        } else if !line.trim().is_empty() {
            rows.push(line.split_whitespace().map(str::to_string).collect());
        }
    }
    Ok(Parsed {
        kind: kind.to_string(),
        header,
        rows,
    })
}

fn expect_columns(row: &[String], n: usize, kind: &str) -> Result<()> {
    if row.len() != n {
        return Err(Error::parse(format!(
            "{kind} row has {} columns, expected {n}: `{}`",
            row.len(),
            row.join(" ")
        )));
    }
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

// Spherical coefficients.

pub fn spherical_to_string(c: &SphericalCoeffs) -> String {
    let mut s = String::from("# spherical-coefficients\n");
    let _ = writeln!(s, "# N {}", c.order);
    let _ = writeln!(s, "# k {}", num(c.k));
    let _ = writeln!(s, "# frame {}", c.frame.name());
    for n in 0..=c.order {
        for m in -(n as i64)..=n as i64 {
            let v = c.values[sh_index(n, m)];
            let _ = writeln!(s, "{n} {m} {} {}", num(v.re), num(v.im));
        }
    }
    s
}

pub fn spherical_from_str(text: &str) -> Result<SphericalCoeffs> {
    let p = parse_text(text, "spherical-coefficients")?;
    let order = p.get_usize("N")?;
    let mut out = SphericalCoeffs::zeros(order, p.get_f64("k")?);
    out.frame = Axis::parse(p.get("frame")?)?;
    if p.rows.len() != out.len() {
        return Err(Error::parse(format!(
            "order {order} needs {} rows, found {}",
            out.len(),
            p.rows.len()
        )));
    }
    for row in &p.rows {
        expect_columns(row, 4, "spherical coefficient")?;
        let n = parse_usize(&row[0], "n")?;
        let m = parse_i64(&row[1], "m")?;
        if n > order || m.unsigned_abs() as usize > n {
            return Err(Error::parse(format!("invalid index (n={n}, m={m})")));
        }
        out.values[sh_index(n, m)] = Complex64::new(parse_f64(&row[2], "re")?, parse_f64(&row[3], "im")?);
    }
    Ok(out)
}

pub fn write_spherical(path: &Path, c: &SphericalCoeffs) -> Result<()> {
    write_file(path, &spherical_to_string(c))
}

pub fn read_spherical(path: &Path) -> Result<SphericalCoeffs> {
    spherical_from_str(&fs::read_to_string(path)?)
}

// Spheroidal coefficients.

pub fn spheroidal_to_string(c: &SpheroidalCoeffs) -> String {
    let mut s = String::from("# spheroidal-coefficients\n");
    let _ = writeln!(s, "# N {}", c.order);
    let _ = writeln!(s, "# c {}", num(c.c));
    let _ = writeln!(s, "# a {}", num(c.a));
    let _ = writeln!(s, "# frame {}", c.frame.name());
    for n in 0..=c.order {
        for m in 0..=n {
            let v = c.a(m, n);
            let _ = writeln!(s, "A {m} {n} {} {}", num(v.re), num(v.im));
        }
    }
    for n in 1..=c.order {
        for m in 1..=n {
            let v = c.b(m, n);
            let _ = writeln!(s, "B {m} {n} {} {}", num(v.re), num(v.im));
        }
    }
    s
}

pub fn spheroidal_from_str(text: &str) -> Result<SpheroidalCoeffs> {
    let p = parse_text(text, "spheroidal-coefficients")?;
    let order = p.get_usize("N")?;
    let mut out = SpheroidalCoeffs::zeros(order, p.get_f64("c")?, p.get_f64("a")?);
    out.frame = Axis::parse(p.get("frame")?)?;
    let expected = (order + 1) * (order + 1);
    if p.rows.len() != expected {
        return Err(Error::parse(format!(
            "order {order} needs {expected} rows, found {}",
            p.rows.len()
        )));
    }
    for row in &p.rows {
        expect_columns(row, 5, "spheroidal coefficient")?;
        let m = parse_usize(&row[1], "m")?;
        let n = parse_usize(&row[2], "n")?;
        let v = Complex64::new(parse_f64(&row[3], "re")?, parse_f64(&row[4], "im")?);
        match row[0].as_str() {
            "A" if m <= n && n <= order => out.a_coeffs[index_a(m, n)] = v,
            "B" if m >= 1 && m <= n && n <= order => out.b_coeffs[index_b(m, n)] = v,
            kind => return Err(Error::parse(format!("invalid entry ({kind}, m={m}, n={n})"))),
        }
    }
    Ok(out)
}

pub fn write_spheroidal(path: &Path, c: &SpheroidalCoeffs) -> Result<()> {
    write_file(path, &spheroidal_to_string(c))
}

pub fn read_spheroidal(path: &Path) -> Result<SpheroidalCoeffs> {
    spheroidal_from_str(&fs::read_to_string(path)?)
}

/// Either kind of coefficient file, told apart by its first line.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffFile {
    Spherical(SphericalCoeffs),
    Spheroidal(SpheroidalCoeffs),
}

pub fn read_coefficients(path: &Path) -> Result<CoeffFile> {
    let text = fs::read_to_string(path)?;
    if text.starts_with("# spheroidal-coefficients") {
        spheroidal_from_str(&text).map(CoeffFile::Spheroidal)
    } else {
        spherical_from_str(&text).map(CoeffFile::Spherical)
    }
}

// Microphone pressures.

/// Pressure file: one row `q x y z re im` per microphone (global positions).
pub fn pressures_to_string(mics: &ArrayGeometry, k: f64, p: &[Complex64]) -> String {
    let mut s = String::from("# pressures\n");
    let _ = writeln!(s, "# Q {}", p.len());
    let _ = writeln!(s, "# k {}", num(k));
    let _ = writeln!(s, "# baffle {}", baffle_name(&mics.baffle));
    for (q, (mic, v)) in mics.mics.iter().zip(p).enumerate() {
        let x = mic.position;
        let _ = writeln!(
            s,
            "{q} {} {} {} {} {}",
            num(x[0]),
            num(x[1]),
            num(x[2]),
            num(v.re),
            num(v.im)
        );
    }
    s
}

fn baffle_name(b: &Baffle) -> &'static str {
    match b {
        Baffle::RigidSphere { .. } => "sphere",
        Baffle::RigidProlateSpheroid { .. } => "spheroid",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureFile {
    pub k: f64,
    pub baffle: String,
    pub positions: Vec<[f64; 3]>,
    pub values: Vec<Complex64>,
}

pub fn pressures_from_str(text: &str) -> Result<PressureFile> {
    let p = parse_text(text, "pressures")?;
    let q = p.get_usize("Q")?;
    if p.rows.len() != q {
        return Err(Error::parse(format!("header says Q = {q}, found {} rows", p.rows.len())));
    }
    let mut positions = Vec::with_capacity(q);
    let mut values = Vec::with_capacity(q);
    for (i, row) in p.rows.iter().enumerate() {
        expect_columns(row, 6, "pressure")?;
        if parse_usize(&row[0], "q")? != i {
            return Err(Error::parse(format!("pressure rows out of order at row {i}")));
        }
        let f: Vec<f64> = row[1..]
            .iter()
            .map(|s| parse_f64(s, "pressure row"))
            .collect::<Result<_>>()?;
        positions.push([f[0], f[1], f[2]]);
        values.push(Complex64::new(f[3], f[4]));
    }
    Ok(PressureFile {
        k: p.get_f64("k")?,
        baffle: p.get("baffle")?.to_string(),
        positions,
        values,
    })
}

pub fn read_pressures(path: &Path) -> Result<PressureFile> {
    pressures_from_str(&fs::read_to_string(path)?)
}

// Field grids.

pub fn grid_to_string(g: &FieldGrid) -> String {
    let s0 = &g.spec;
    let mut s = String::with_capacity(g.len() * 170 + 256);
    s.push_str("# field-grid\n");
    let _ = writeln!(s, "# nx {}", s0.nx);
    let _ = writeln!(s, "# ny {}", s0.ny);
    let _ = writeln!(s, "# x_min {}", num(s0.x_min));
    let _ = writeln!(s, "# x_max {}", num(s0.x_max));
    let _ = writeln!(s, "# y_min {}", num(s0.y_min));
    let _ = writeln!(s, "# y_max {}", num(s0.y_max));
    let _ = writeln!(s, "# z {}", num(s0.z));
    let _ = writeln!(s, "# k {}", num(g.k));
    let _ = writeln!(s, "# frame {}", g.frame.name());
    let _ = writeln!(s, "# columns x y re_true im_true re_rec im_rec sdr_db");
    for j in 0..s0.ny {
        for i in 0..s0.nx {
            let idx = j * s0.nx + i;
            let (t, r) = (g.p_true[idx], g.p_rec[idx]);
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                num(s0.x(i)),
                num(s0.y(j)),
                num(t.re),
                num(t.im),
                num(r.re),
                num(r.im),
                num(g.sdr_db[idx])
            );
        }
        // blank line between rows for gnuplot's pm3d
        s.push('\n');
    }
    s
}

/// Reads a grid; the interior mask is recomputed from `baffle` when given.
pub fn grid_from_str(text: &str, baffle: Option<&Baffle>) -> Result<FieldGrid> {
    let p = parse_text(text, "field-grid")?;
    let spec = GridSpec {
        nx: p.get_usize("nx")?,
        ny: p.get_usize("ny")?,
        x_min: p.get_f64("x_min")?,
        x_max: p.get_f64("x_max")?,
        y_min: p.get_f64("y_min")?,
        y_max: p.get_f64("y_max")?,
        z: p.get_f64("z")?,
    };
    spec.validate()?;
    let n = spec.nx * spec.ny;
    if p.rows.len() != n {
        return Err(Error::parse(format!("grid header says {n} points, found {} rows", p.rows.len())));
    }
    let mut t = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for row in &p.rows {
        expect_columns(row, 7, "grid")?;
        let f: Vec<f64> = row.iter().map(|s| parse_f64(s, "grid row")).collect::<Result<_>>()?;
        t.push(Complex64::new(f[2], f[3]));
        r.push(Complex64::new(f[4], f[5]));
    }
    let mut g = FieldGrid::new(spec, p.get_f64("k")?, t, r, baffle)?;
    g.frame = Axis::parse(p.get("frame")?)?;
    Ok(g)
}

pub fn write_grid(path: &Path, g: &FieldGrid) -> Result<()> {
    write_file(path, &grid_to_string(g))
}

pub fn read_grid(path: &Path, baffle: Option<&Baffle>) -> Result<FieldGrid> {
    grid_from_str(&fs::read_to_string(path)?, baffle)
}

// Metrics.

/// One JSON record summarizing a case.
pub fn metrics_record(case: &CaseResult) -> String {
    let report = |r: &crate::numerics::SolveReport| {
        serde_json::json!({
            "effective_rank": r.effective_rank,
            "unknowns": r.unknowns,
            "condition_number": r.condition_number(),
        })
    };
    let metrics = |m: &SweetSpotMetrics| serde_json::to_value(m).expect("metrics serialize");
    let v = serde_json::json!({
        "case": case.name,
        "frequency_hz": case.wave.frequency,
        "direction": case.wave.direction,
        "hoa": metrics(&case.hoa_metrics),
        "pshoa": metrics(&case.pshoa_metrics),
        "hoa_solver": report(&case.hoa_report),
        "pshoa_solver": report(&case.spheroidal_report),
    });
    let mut s = serde_json::to_string_pretty(&v).expect("json");
    s.push('\n');
    s
}

/// Gnuplot script drawing the real part and SDR of each grid of a case.
pub fn plot_script(case: &str, grids: &[(&str, &str)], threshold_db: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script for case {case}");
    let _ = writeln!(s, "set terminal pngcairo size 1500,900");
    let _ = writeln!(s, "set output '{case}.png'");
    let _ = writeln!(s, "set multiplot layout 2,{}", grids.len());
    let _ = writeln!(s, "set view map\nset size ratio -1\nunset key");
    let _ = writeln!(s, "set xlabel 'x (m)'\nset ylabel 'y (m)'");
    for (title, file) in grids {
        let _ = writeln!(s, "set title '{title}: Re p'\nset cbrange [-1:1]");
        let _ = writeln!(s, "splot '{file}' using 1:2:5 with pm3d");
    }
    for (title, file) in grids {
        let _ = writeln!(s, "set title '{title}: SDR (dB)'\nset cbrange [0:60]");
        let _ = writeln!(
            s,
            "set contour base\nset cntrparam levels discrete {threshold_db}\nsplot '{file}' using 1:2:($7 > 60 ? 60 : $7) with pm3d\nunset contour"
        );
    }
    s.push_str("unset multiplot\n");
    s
}

/// Writes all files of a case into `dir`; returns the paths written.
pub fn write_case(dir: &Path, case: &CaseResult, threshold_db: f64) -> Result<Vec<PathBuf>> {
    let name = &case.name;
    let files = [
        (format!("{name}_hoa_coeffs.txt"), spherical_to_string(&case.hoa)),
        (format!("{name}_pshoa_coeffs.txt"), spheroidal_to_string(&case.spheroidal)),
        (format!("{name}_truth_grid.txt"), grid_to_string(&case.truth)),
        (format!("{name}_hoa_grid.txt"), grid_to_string(&case.hoa_grid)),
        (format!("{name}_pshoa_grid.txt"), grid_to_string(&case.pshoa_grid)),
        (format!("{name}_metrics.json"), metrics_record(case)),
    ];
    let mut written = Vec::new();
    for (file, contents) in &files {
        let path = dir.join(file);
        write_file(&path, contents)?;
        written.push(path);
    }
    let script = plot_script(
        name,
        &[
            ("ground truth", &files[2].0),
            ("HOA", &files[3].0),
            ("ps-HOA", &files[4].0),
        ],
        threshold_db,
    );
    let path = dir.join(format!("{name}_plot.gp"));
    write_file(&path, &script)?;
    written.push(path);
    Ok(written)
}

// Spheroidal wave function table cache.

/// Cache file for tables of parameter `c` (to 12 significant digits) up to `n_max`.
pub fn table_cache_path(dir: &Path, c: f64, n_max: usize, precision: PrecisionMode) -> PathBuf {
    dir.join(format!("swf_c{c:.11e}_N{n_max}_{}.txt", precision.name()))
}

pub fn tables_to_string(ctx: &SwfContext) -> String {
    let mut s = String::from("# swf-tables\n");
    let _ = writeln!(s, "# c {}", num(ctx.c()));
    let _ = writeln!(s, "# n_max {}", ctx.n_max());
    let _ = writeln!(s, "# precision {}", ctx.precision().name());
    for t in ctx.tables() {
        let _ = writeln!(
            s,
            "table {} {} {} {} {} {} {}",
            t.m,
            t.n,
            num(t.c),
            num(t.lambda),
            num(t.norm),
            t.d.len(),
            t.precision.name()
        );
        for d in &t.d {
            let _ = writeln!(s, "{}", num(*d));
        }
    }
    s
}

pub fn tables_from_str(text: &str) -> Result<SwfContext> {
    let p = parse_text(text, "swf-tables")?;
    let c = p.get_f64("c")?;
    let n_max = p.get_usize("n_max")?;
    let precision = PrecisionMode::parse(p.get("precision")?)?;
    let mut tables = Vec::new();
    let mut rows = p.rows.iter();
    while let Some(head) = rows.next() {
        if head.first().map(String::as_str) != Some("table") {
            return Err(Error::parse(format!("expected a table record, found `{}`", head.join(" "))));
        }
        expect_columns(head, 8, "table header")?;
        let count = parse_usize(&head[6], "r_count")?;
        let mut d = Vec::with_capacity(count);
        for _ in 0..count {
            let row = rows
                .next()
                .ok_or_else(|| Error::parse("table record ends early"))?;
            expect_columns(row, 1, "d coefficient")?;
            d.push(parse_f64(&row[0], "d")?);
        }
        tables.push(SwfTable {
            m: parse_usize(&head[1], "m")?,
            n: parse_usize(&head[2], "n")?,
            c: parse_f64(&head[3], "c")?,
            lambda: parse_f64(&head[4], "lambda")?,
            norm: parse_f64(&head[5], "normN")?,
            d,
            precision: PrecisionMode::parse(&head[7])?,
        });
    }
    SwfContext::from_tables(c, n_max, precision, tables)
}

pub fn write_tables(dir: &Path, ctx: &SwfContext) -> Result<PathBuf> {
    let path = table_cache_path(dir, ctx.c(), ctx.n_max(), ctx.precision());
    write_file(&path, &tables_to_string(ctx))?;
    Ok(path)
}

/// Loads cached tables covering degree `n_max`; a missing file is a config
/// error that names the `tables` command.
pub fn load_tables(dir: &Path, c: f64, n_max: usize, precision: PrecisionMode) -> Result<SwfContext> {
    let path = table_cache_path(dir, c, n_max, precision);
    if !path.exists() {
        return Err(Error::Config {
            key: "cache".into(),
            message: format!(
                "no spheroidal tables at {} (c = {c}, N = {n_max}, {}); run `spheroamb tables --c {c} --n-max {n_max} --precision {} --cache {}` first",
                path.display(),
                precision.name(),
                precision.name(),
                dir.display()
            ),
        });
    }
    tables_from_str(&fs::read_to_string(&path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sphere_array, PlaneWave};
    use crate::spherical::plane_wave_coeffs;

    #[test]
    fn spherical_round_trip_is_exact() {
        let pw = PlaneWave::new(541.8, 343.0, [0.3, 0.2, 0.9]).unwrap();
        let mut c = plane_wave_coeffs(&pw, 5);
        c.frame = Axis::Y;
        let back = spherical_from_str(&spherical_to_string(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn spheroidal_round_trip_is_exact() {
        let mut c = SpheroidalCoeffs::zeros(4, 9.9, 0.998);
        for (i, v) in c.a_coeffs.iter_mut().enumerate() {
            *v = Complex64::new(i as f64 / 7.0, -1.0 / (i + 1) as f64);
        }
        for (i, v) in c.b_coeffs.iter_mut().enumerate() {
            *v = Complex64::new(-(i as f64).sqrt(), 0.1);
        }
        c.frame = Axis::X;
        let back = spheroidal_from_str(&spheroidal_to_string(&c)).unwrap();
        assert_eq!(back, c);
        match read_coefficients_from_text(&spheroidal_to_string(&c)) {
            CoeffFile::Spheroidal(_) => {}
            _ => panic!("wrong kind"),
        }
    }

    fn read_coefficients_from_text(text: &str) -> CoeffFile {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, text).unwrap();
        read_coefficients(&path).unwrap()
    }

    #[test]
    fn tables_round_trip_is_exact() {
        let ctx = SwfContext::build(3.3, 5, PrecisionMode::Double).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_tables(dir.path(), &ctx).unwrap();
        let back = load_tables(dir.path(), 3.3, 5, PrecisionMode::Double).unwrap();
        assert_eq!(back, ctx);
        let err = load_tables(dir.path(), 3.3, 6, PrecisionMode::Double).unwrap_err();
        assert!(err.to_string().contains("spheroamb tables"));
    }

    #[test]
    fn pressures_round_trip() {
        let arr = build_sphere_array(0.2, 2, 3).unwrap();
        let p: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 0.5)).collect();
        let f = pressures_from_str(&pressures_to_string(&arr, 2.0, &p)).unwrap();
        assert_eq!(f.values, p);
        assert_eq!(f.baffle, "sphere");
        assert_eq!(f.positions[4], arr.mics[4].position);
    }

    #[test]
    fn grid_round_trip() {
        let spec = GridSpec {
            nx: 3,
            ny: 2,
            ..GridSpec::default()
        };
        let t: Vec<Complex64> = (0..6).map(|i| Complex64::new(1.0, i as f64)).collect();
        let r: Vec<Complex64> = t.iter().map(|v| v * 0.99).collect();
        let g = FieldGrid::new(spec, 9.9, t, r, None).unwrap();
        let back = grid_from_str(&grid_to_string(&g), None).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(spherical_from_str("# pressures\n").is_err());
        assert!(spherical_from_str("# spherical-coefficients\n# N 1\n# k 1\n# frame z\n0 0 1 0\n").is_err());
        assert!(tables_from_str("# swf-tables\n# c 1\n# n_max 0\n# precision double\ntable 0 0 1 0 1 2 double\n1\n").is_err());
    }
}
