//! Reachable sets of a qutrit `{g, e1, e2}` with energies `{0, E, E}`
//! starting from its ground state, drawn in the probability simplex.
//!
//! Points are mapped to the plane by `x = p_e1 + p_e2/2`, `y = (√3/2) p_e2`,
//! which puts `g` at the origin, `e1` at `(1, 0)` and `e2` at `(1/2, √3/2)`.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::majorization::tp_reach_vertices;
use crate::thermal::{thermalize_memory, PairOp, PopulationVector};
use crate::{Error, Result};

/// Max-norm distance under which two orbit points are the same.
pub const DEDUP_TOL: f64 = 1e-12;
/// Orientation tolerance for hull construction and the convexity check.
const CROSS_TOL: f64 = 1e-14;
pub const DEFAULT_DEPTH: usize = 8;
pub const CSV_HEADER: [&str; 9] = ["region", "provenance", "shape", "vertex", "p_g", "p_e1", "p_e2", "x", "y"];

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Where a region's vertices come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Extreme points of the thermo-majorization polytope.
    Tp,
    /// Hull of the β-swap orbit; an inner approximation of the ETP set.
    EtpApprox,
    /// States along a memoryless thermalization sequence.
    MtpPath,
    /// States produced with a two-dimensional memory.
    Mmtp2Points,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Tp => "TP",
            Provenance::EtpApprox => "ETP-approx",
            Provenance::MtpPath => "MTP-path",
            Provenance::Mmtp2Points => "MMTP2-points",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TP" => Ok(Provenance::Tp),
            "ETP-approx" => Ok(Provenance::EtpApprox),
            "MTP-path" => Ok(Provenance::MtpPath),
            "MMTP2-points" => Ok(Provenance::Mmtp2Points),
            other => Err(Error::Format(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Convex polygon, vertices counter-clockwise in the plot plane.
    Polygon,
    /// Loose points with no implied edges.
    Points,
}

impl Shape {
    pub fn as_str(&self) -> &'static str {
        match self {
            Shape::Polygon => "polygon",
            Shape::Points => "points",
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polygon" => Ok(Shape::Polygon),
            "points" => Ok(Shape::Points),
            other => Err(Error::Format(format!("unknown shape `{other}`"))),
        }
    }
}

/// Plot-plane coordinates of a qutrit distribution.
pub fn plot_xy(p: &PopulationVector) -> (f64, f64) {
    (p.get(1) + 0.5 * p.get(2), SQRT3_2 * p.get(2))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// A named set of qutrit states, either a convex polygon or loose points.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexRegion {
    pub name: String,
    pub provenance: Provenance,
    pub shape: Shape,
    pub vertices: Vec<PopulationVector>,
}

impl SimplexRegion {
    /// Convex hull of `points` (Andrew's monotone chain), counter-clockwise,
    /// collinear points dropped.
    pub fn hull(
        name: impl Into<String>,
        provenance: Provenance,
        points: &[PopulationVector],
    ) -> Result<Self> {
        check_qutrits(points)?;
        let mut pts: Vec<&PopulationVector> = points.iter().collect();
        pts.sort_by(|a, b| {
            let (pa, pb) = (plot_xy(a), plot_xy(b));
            pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1))
        });
        pts.dedup_by(|a, b| a.max_abs_diff(b) <= DEDUP_TOL);
        let vertices = if pts.len() < 3 {
            pts.into_iter().cloned().collect()
        } else {
            let mut lower: Vec<&PopulationVector> = Vec::new();
            for &p in &pts {
                while lower.len() >= 2
                    && cross(
                        plot_xy(lower[lower.len() - 2]),
                        plot_xy(lower[lower.len() - 1]),
                        plot_xy(p),
                    ) <= CROSS_TOL
                {
                    lower.pop();
                }
                lower.push(p);
            }
            let mut upper: Vec<&PopulationVector> = Vec::new();
            for &p in pts.iter().rev() {
                while upper.len() >= 2
                    && cross(
                        plot_xy(upper[upper.len() - 2]),
                        plot_xy(upper[upper.len() - 1]),
                        plot_xy(p),
                    ) <= CROSS_TOL
                {
                    upper.pop();
                }
                upper.push(p);
            }
            lower.pop();
            upper.pop();
            lower.into_iter().chain(upper).cloned().collect()
        };
        Ok(Self {
            name: name.into(),
            provenance,
            shape: Shape::Polygon,
            vertices,
        })
    }

    pub fn points(
        name: impl Into<String>,
        provenance: Provenance,
        points: Vec<PopulationVector>,
    ) -> Result<Self> {
        check_qutrits(&points)?;
        Ok(Self {
            name: name.into(),
            provenance,
            shape: Shape::Points,
            vertices: points,
        })
    }

    fn xy(&self) -> Vec<(f64, f64)> {
        self.vertices.iter().map(plot_xy).collect()
    }

    /// Consecutive vertex pairs, closing the loop. Empty for point sets.
    pub fn edges(&self) -> Vec<(PopulationVector, PopulationVector)> {
        let n = self.vertices.len();
        if self.shape == Shape::Points || n < 2 {
            return Vec::new();
        }
        (0..n)
            .map(|k| (self.vertices[k].clone(), self.vertices[(k + 1) % n].clone()))
            .collect()
    }

    /// Every turn is strictly counter-clockwise.
    pub fn is_convex(&self) -> bool {
        let v = self.xy();
        let n = v.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|k| cross(v[k], v[(k + 1) % n], v[(k + 2) % n]) > 0.0)
    }

    /// Euclidean distance in the plot plane from `p` to the polygon boundary,
    /// positive outside and negative inside. Degenerate polygons (fewer than
    /// three vertices) have no interior.
    pub fn signed_distance(&self, p: &PopulationVector) -> f64 {
        let v = self.xy();
        let pt = plot_xy(p);
        match v.len() {
            0 => f64::INFINITY,
            1 => segment_distance(pt, v[0], v[0]),
            n => {
                let dist = (0..n)
                    .map(|k| segment_distance(pt, v[k], v[(k + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                let inside = n >= 3 && (0..n).all(|k| cross(v[k], v[(k + 1) % n], pt) >= 0.0);
                if inside {
                    -dist
                } else {
                    dist
                }
            }
        }
    }

    pub fn contains(&self, p: &PopulationVector, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }
}

fn check_qutrits(points: &[PopulationVector]) -> Result<()> {
    for p in points {
        if p.dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: p.dim(),
            });
        }
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.5 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::param("gamma", gamma, "must lie in (1/2, 1)"))
    }
}

/// Gibbs state `[1, q, q] / (1 + 2q)` with `q = (1-γ)/γ`.
pub fn qutrit_gibbs(gamma: f64) -> Result<PopulationVector> {
    check_gamma(gamma)?;
    let q = (1.0 - gamma) / gamma;
    let z = 1.0 + 2.0 * q;
    PopulationVector::new(vec![1.0 / z, q / z, q / z])
}

/// The four thermalizations between `g` and `e_s` over a qubit memory, in
/// the order `(g1,e_s1), (g1,e_s2), (g2,e_s1), (g2,e_s2)`. Composite index is
/// `level * 2 + slot`.
fn memory_block(probs: &mut [f64], s: usize, gamma: f64) -> Result<()> {
    for k in 0..2 {
        for l in 0..2 {
            PairOp::full_thermalization(k, s * 2 + l, gamma)?.apply_in_place(probs);
        }
    }
    Ok(())
}

fn run_blocks(blocks: &[usize], gamma: f64) -> Result<PopulationVector> {
    let start = PopulationVector::basis(3, 0)?.tensor(&PopulationVector::uniform(2)?);
    let mut probs = start.into_vec();
    for &s in blocks {
        memory_block(&mut probs, s, gamma)?;
    }
    thermalize_memory(&PopulationVector::new(probs)?, 3, 2)?.system_marginal(3, 2)
}

/// Vertices `[A_1, A_2, B_1, B_2]` reached from the ground state with a
/// two-dimensional memory. `A_s` runs the `(g, e_s)` block once; `B_s` runs
/// it and then the block for the other excited level, before resetting the
/// memory.
pub fn qutrit_mmtp2_vertices(gamma: f64) -> Result<Vec<PopulationVector>> {
    check_gamma(gamma)?;
    Ok(vec![
        run_blocks(&[1], gamma)?,
        run_blocks(&[2], gamma)?,
        run_blocks(&[1, 2], gamma)?,
        run_blocks(&[2, 1], gamma)?,
    ])
}

/// Breadth-first closure of the ground state under the β-swaps `(g, e1)`,
/// `(g, e2)` and the swap `(e1, e2)`, `depth` layers deep, with the Gibbs
/// point added. Returned in discovery order.
pub fn etp_orbit(gamma: f64, depth: usize) -> Result<Vec<PopulationVector>> {
    check_gamma(gamma)?;
    if depth == 0 {
        return Err(Error::param("depth", 0.0, "must be at least 1"));
    }
    let q = (1.0 - gamma) / gamma;
    let ops = [
        PairOp::beta_swap(0, 1, q)?,
        PairOp::beta_swap(0, 2, q)?,
        PairOp::beta_swap(1, 2, 1.0)?,
    ];
    let mut orbit = vec![PopulationVector::basis(3, 0)?];
    let mut frontier = orbit.clone();
    for _ in 0..depth {
        let mut next = Vec::new();
        for p in &frontier {
            for op in &ops {
                let v = op.apply(p)?;
                if orbit.iter().all(|u| u.max_abs_diff(&v) > DEDUP_TOL) {
                    orbit.push(v.clone());
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let gibbs = qutrit_gibbs(gamma)?;
    if orbit.iter().all(|u| u.max_abs_diff(&gibbs) > DEDUP_TOL) {
        orbit.push(gibbs);
    }
    Ok(orbit)
}

pub fn etp_orbit_hull(gamma: f64, depth: usize) -> Result<SimplexRegion> {
    SimplexRegion::hull("ETP", Provenance::EtpApprox, &etp_orbit(gamma, depth)?)
}

/// Polytope of states thermo-majorized by the ground state.
pub fn tp_region(gamma: f64) -> Result<SimplexRegion> {
    let vertices = tp_reach_vertices(&PopulationVector::basis(3, 0)?, &qutrit_gibbs(gamma)?)?;
    SimplexRegion::hull("TP", Provenance::Tp, &vertices)
}

/// The regions written for the simplex figure: the TP, ETP and MMTP(2)
/// polygons and the `A`/`B` vertex sets as points.
pub fn figure_regions(gamma: f64, depth: usize) -> Result<Vec<SimplexRegion>> {
    let v = qutrit_mmtp2_vertices(gamma)?;
    let mut hull_points = vec![PopulationVector::basis(3, 0)?, qutrit_gibbs(gamma)?];
    hull_points.extend(v.iter().cloned());
    Ok(vec![
        tp_region(gamma)?,
        etp_orbit_hull(gamma, depth)?,
        SimplexRegion::hull("MMTP2", Provenance::Mmtp2Points, &hull_points)?,
        SimplexRegion::points("A", Provenance::Mmtp2Points, v[..2].to_vec())?,
        SimplexRegion::points("B", Provenance::Mmtp2Points, v[2..].to_vec())?,
    ])
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `regions` as CSV, one row per vertex, preceded by `#` comment
/// lines (`comments` first, then the coordinate convention).
pub fn write_regions<W: Write>(
    mut out: W,
    regions: &[SimplexRegion],
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "# x = p_e1 + p_e2/2, y = sqrt(3)/2 * p_e2")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in regions {
        for (k, v) in r.vertices.iter().enumerate() {
            let (x, y) = plot_xy(v);
            let mut row = vec![
                r.name.clone(),
                r.provenance.to_string(),
                r.shape.as_str().to_string(),
                k.to_string(),
            ];
            row.extend(v.probs().iter().chain([x, y].iter()).map(|&f| format_float(f)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_regions(path: &Path, regions: &[SimplexRegion], comments: &[String]) -> Result<()> {
    write_regions(File::create(path)?, regions, comments)
}

/// Reads back what [`write_regions`] wrote. Vertices are taken from the
/// `p_*` columns; rows of one region must be contiguous.
pub fn read_regions<R: Read>(input: R) -> Result<Vec<SimplexRegion>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format(format!("unexpected header `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut regions: Vec<SimplexRegion> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|_| Error::Format(format!("bad number `{}` in column {}", &record[k], CSV_HEADER[k])))
        };
        let v = PopulationVector::new(vec![num(4)?, num(5)?, num(6)?])?;
        let provenance: Provenance = record[1].parse()?;
        let shape: Shape = record[2].parse()?;
        match regions.last_mut() {
            Some(r) if r.name == record[0] && r.provenance == provenance && r.shape == shape => {
                r.vertices.push(v)
            }
            _ => regions.push(SimplexRegion {
                name: record[0].to_string(),
                provenance,
                shape,
                vertices: vec![v],
            }),
        }
    }
    Ok(regions)
}

pub fn import_regions(path: &Path) -> Result<Vec<SimplexRegion>> {
    read_regions(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorization::thermo_majorizes;
    use crate::memory::memory_beta_swap_ground;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const GAMMAS: [f64; 3] = [0.65, 0.75, 0.85];

    fn ground() -> PopulationVector {
        PopulationVector::basis(3, 0).unwrap()
    }

    #[test]
    fn a_vertices_mirror_each_other() {
        for g in GAMMAS {
            let v = qutrit_mmtp2_vertices(g).unwrap();
            assert!(v[0].swapped(1, 2).unwrap().max_abs_diff(&v[1]) <= 1e-15);
            assert!(v[2].swapped(1, 2).unwrap().max_abs_diff(&v[3]) <= 1e-15);
        }
    }

    #[test]
    fn a_vertex_matches_qubit_memory_protocol() {
        for g in GAMMAS {
            let v = qutrit_mmtp2_vertices(g).unwrap();
            let ground_value = memory_beta_swap_ground(2, 1.0, g).unwrap();
            assert_abs_diff_eq!(v[0].get(1), 1.0 - ground_value, epsilon = 1e-14);
            assert_abs_diff_eq!(v[0].get(2), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mmtp2_vertices_are_tp_reachable() {
        for g in GAMMAS {
            let gibbs = qutrit_gibbs(g).unwrap();
            let tp = tp_region(g).unwrap();
            for v in qutrit_mmtp2_vertices(g).unwrap() {
                assert!(thermo_majorizes(&ground(), &v, &gibbs).unwrap());
                assert!(tp.contains(&v, 1e-12));
            }
        }
    }

    #[test]
    fn tp_vertices_symmetric() {
        let gibbs = qutrit_gibbs(0.75).unwrap();
        let verts = tp_reach_vertices(&ground(), &gibbs).unwrap();
        for v in &verts {
            let m = v.swapped(1, 2).unwrap();
            assert!(verts.iter().any(|u| u.max_abs_diff(&m) <= 1e-12));
        }
    }

    #[test]
    fn orbit_first_layer() {
        let g = 0.75;
        let q = (1.0 - g) / g;
        let orbit = etp_orbit(g, 1).unwrap();
        for expect in [vec![1.0 - q, q, 0.0], vec![1.0 - q, 0.0, q]] {
            let e = PopulationVector::new(expect).unwrap();
            assert!(orbit.iter().any(|u| u.max_abs_diff(&e) <= 1e-15));
        }
    }

    #[test]
    fn orbit_hull_properties() {
        for g in GAMMAS {
            let gibbs = qutrit_gibbs(g).unwrap();
            let tp = tp_region(g).unwrap();
            assert!(tp.is_convex());
            let mut prev: Option<SimplexRegion> = None;
            for depth in 1..=DEFAULT_DEPTH {
                let hull = etp_orbit_hull(g, depth).unwrap();
                assert!(hull.is_convex(), "depth {depth}");
                assert!(hull.contains(&gibbs, 1e-12));
                for v in &hull.vertices {
                    assert!(thermo_majorizes(&ground(), v, &gibbs).unwrap());
                    assert!(tp.contains(v, 1e-12));
                }
                if let Some(p) = &prev {
                    assert!(p.vertices.iter().all(|v| hull.contains(v, 1e-12)), "depth {depth}");
                }
                prev = Some(hull);
            }
        }
    }

    #[test]
    fn partial_sequences_stay_in_orbit_hull() {
        let mut rng = StdRng::seed_from_u64(11);
        for g in GAMMAS {
            let q = (1.0 - g) / g;
            let hull = etp_orbit_hull(g, DEFAULT_DEPTH).unwrap();
            for _ in 0..300 {
                let mut p = ground();
                for _ in 0..rng.random_range(1..=6) {
                    let lambda: f64 = rng.random();
                    let op = match rng.random_range(0..3) {
                        0 => PairOp::elementary(0, 1, lambda, q),
                        1 => PairOp::elementary(0, 2, lambda, q),
                        _ => PairOp::elementary(1, 2, lambda, 1.0),
                    }
                    .unwrap();
                    p = op.apply(&p).unwrap();
                }
                assert!(hull.contains(&p, 1e-9), "{:?}", p.probs());
            }
        }
    }

    #[test]
    fn signed_distance_on_unit_triangle() {
        let tri = SimplexRegion::hull(
            "simplex",
            Provenance::Tp,
            &[ground(), PopulationVector::basis(3, 1).unwrap(), PopulationVector::basis(3, 2).unwrap()],
        )
        .unwrap();
        assert!(tri.is_convex());
        let centre = PopulationVector::uniform(3).unwrap();
        assert!(tri.signed_distance(&centre) < 0.0);
        assert_abs_diff_eq!(tri.signed_distance(&ground()), 0.0, epsilon = 1e-15);
        let small = SimplexRegion::hull(
            "edge",
            Provenance::Tp,
            &[ground(), PopulationVector::basis(3, 1).unwrap(), PopulationVector::new(vec![0.5, 0.5, 0.0]).unwrap()],
        )
        .unwrap();
        assert_eq!(small.vertices.len(), 2);
        assert!(small.signed_distance(&centre) > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let regions = figure_regions(0.75, DEFAULT_DEPTH).unwrap();
        let polygons = regions.iter().filter(|r| r.shape == Shape::Polygon).count();
        assert_eq!((polygons, regions.len() - polygons), (3, 2));
        let mut buf = Vec::new();
        write_regions(&mut buf, &regions, &["gamma = 0.75".to_string()]).unwrap();
        let back = read_regions(buf.as_slice()).unwrap();
        assert_eq!(back.len(), regions.len());
        for (a, b) in regions.iter().zip(&back) {
            assert_eq!((&a.name, a.provenance, a.shape), (&b.name, b.provenance, b.shape));
            assert_eq!(a.vertices.len(), b.vertices.len());
            for (u, v) in a.vertices.iter().zip(&b.vertices) {
                assert!(u.max_abs_diff(v) <= 1e-9);
            }
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("regions.csv");
        export_regions(&path, &[], &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec![CSV_HEADER.join(",")]);
        assert!(import_regions(&path).unwrap().is_empty());
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(qutrit_mmtp2_vertices(0.5).is_err());
        assert!(etp_orbit(0.75, 0).is_err());
        assert!(read_regions("a,b\n1,2\n".as_bytes()).is_err());
        assert!("ETP".parse::<Provenance>().is_err());
    }
}
