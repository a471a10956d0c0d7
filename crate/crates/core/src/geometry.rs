//! Domains with a single distance-to-boundary variable and meshes graded
//! toward the boundary.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// The open interval `(a, b)`.
    Interval { a: f64, b: f64 },
    /// The ball of radius `radius` in `dim` dimensions, radially symmetric.
    Ball { radius: f64, dim: usize },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!("interval requires b > a, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
        }
        if dim < 2 {
            return Err(Error::domain(format!("ball dimension must be at least 2, got {dim}")));
        }
        Ok(Domain::Ball { radius, dim })
    }

    /// Parse `interval(a,b)` or `ball(R,N)`.
    pub fn parse(key: &str) -> Result<Self> {
        let key = key.trim();
        let (name, args) = split_call(key).ok_or_else(|| Error::config(format!("unknown domain '{key}'")))?;
        let nums: Vec<f64> = args
            .iter()
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("malformed domain arguments in '{key}'")))?;
        match (name, nums.as_slice()) {
            ("interval", [a, b]) => Domain::interval(*a, *b),
            ("ball", [r, n]) if n.fract() == 0.0 && *n >= 0.0 => Domain::ball(*r, *n as usize),
            _ => Err(Error::config(format!("unknown domain '{key}'"))),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Largest value of the boundary distance (attained at the centre).
    pub fn inradius(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::Ball { radius, .. } => radius,
        }
    }

    /// Spatial dimension entering the radial metric `r^{N-1}`; an interval
    /// carries no metric weight.
    pub fn metric_dim(&self) -> usize {
        match *self {
            Domain::Interval { .. } => 1,
            Domain::Ball { dim, .. } => dim,
        }
    }

    /// Domain shrunk by `eps` in boundary distance: `{x : d(x) > eps}`.
    pub fn shrink(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || eps >= self.inradius() {
            return Err(Error::domain(format!("shrinking by {eps} leaves an empty domain")));
        }
        match *self {
            Domain::Interval { a, b } => Domain::interval(a + eps, b - eps),
            Domain::Ball { radius, dim } => Domain::ball(radius - eps, dim),
        }
    }

    /// Coordinate (x, or r for balls) at boundary distance `d` on the side
    /// used by the symmetric solvers: the left end for intervals.
    pub fn coordinate_at_distance(&self, d: f64) -> f64 {
        match *self {
            Domain::Interval { a, .. } => a + d,
            Domain::Ball { radius, .. } => radius - d,
        }
    }

    /// Human-readable description of the domain and its boundary.
    pub fn describe(&self) -> String {
        match *self {
            Domain::Interval { a, b } => format!("interval({a},{b}), boundary {{{a}, {b}}}"),
            Domain::Ball { radius, dim } => format!("ball(R={radius}, N={dim}), boundary r = {radius}"),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Domain::Interval { a, b } => write!(f, "interval({a},{b})"),
            Domain::Ball { radius, dim } => write!(f, "ball({radius},{dim})"),
        }
    }
}

pub(crate) fn split_call(key: &str) -> Option<(&str, Vec<&str>)> {
    let open = key.find('(')?;
    if !key.ends_with(')') {
        return None;
    }
    let name = key[..open].trim();
    let inner = &key[open + 1..key.len() - 1];
    let args = if inner.trim().is_empty() { vec![] } else { inner.split(',').collect() };
    Some((name, args))
}

/// Distance from `x` (a coordinate, or the radius for balls) to the boundary.
pub fn distance_to_boundary(domain: &Domain, x: f64) -> Result<f64> {
    match *domain {
        Domain::Interval { a, b } => {
            if x < a || x > b || !x.is_finite() {
                return Err(Error::domain(format!("point {x} outside [{a}, {b}]")));
            }
            Ok((x - a).min(b - x))
        }
        Domain::Ball { radius, .. } => {
            if x < 0.0 || x > radius || !x.is_finite() {
                return Err(Error::domain(format!("radius {x} outside [0, {radius}]")));
            }
            Ok(radius - x)
        }
    }
}

/// Nodes of a 1D or radial grid together with the domain they discretise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub domain: Domain,
    pub nodes: Vec<f64>,
    pub grading: f64,
    /// Indices of nodes lying on the boundary.
    pub boundary_nodes: Vec<usize>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn distances(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|&x| distance_to_boundary(&self.domain, x).unwrap_or(0.0))
            .collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(0.0, f64::max)
    }
}

/// Graded mesh with `n_cells` cells. Boundary distance of node `i` follows
/// `(s_i)^grading` with `s_i` the uniform parameter measured from the nearest
/// boundary endpoint: intervals are graded from both ends toward the midpoint,
/// balls from `r = R` toward the centre.
pub fn build_graded_mesh(domain: &Domain, n_cells: usize, grading: f64) -> Result<Mesh> {
    if n_cells < 4 {
        return Err(Error::domain(format!("mesh needs at least 4 cells, got {n_cells}")));
    }
    if !(grading >= 1.0) || !grading.is_finite() {
        return Err(Error::domain(format!("grading exponent must be >= 1, got {grading}")));
    }
    let n = n_cells as f64;
    let (nodes, boundary_nodes) = match *domain {
        Domain::Interval { a, b } => {
            let len = b - a;
            let nodes: Vec<f64> = (0..=n_cells)
                .map(|i| {
                    if i == 0 {
                        return a;
                    }
                    if i == n_cells {
                        return b;
                    }
                    let s = i as f64 / n;
                    if s <= 0.5 {
                        a + 0.5 * len * (2.0 * s).powf(grading)
                    } else {
                        b - 0.5 * len * (2.0 * (1.0 - s)).powf(grading)
                    }
                })
                .collect();
            (nodes, vec![0, n_cells])
        }
        Domain::Ball { radius, .. } => {
            let nodes: Vec<f64> = (0..=n_cells)
                .map(|i| {
                    if i == n_cells {
                        return radius;
                    }
                    radius * (1.0 - (1.0 - i as f64 / n).powf(grading))
                })
                .collect();
            (nodes, vec![n_cells])
        }
    };
    Ok(Mesh { domain: *domain, nodes, grading, boundary_nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let unit = Domain::interval(0.0, 1.0).unwrap();
        assert!((distance_to_boundary(&unit, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(distance_to_boundary(&unit, 1.0).unwrap(), 0.0);
        let disc = Domain::ball(1.0, 2).unwrap();
        assert!((distance_to_boundary(&disc, 0.9).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(distance_to_boundary(&unit, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(1.0, 1).is_err());
        assert!(Domain::ball(-1.0, 3).is_err());
    }

    #[test]
    fn parse_keys() {
        assert_eq!(Domain::parse("interval(0,1)").unwrap(), Domain::Interval { a: 0.0, b: 1.0 });
        assert_eq!(Domain::parse("ball(1, 3)").unwrap(), Domain::Ball { radius: 1.0, dim: 3 });
        assert!(Domain::parse("square(1)").is_err());
    }

    #[test]
    fn uniform_mesh_example() {
        let m = build_graded_mesh(&Domain::interval(0.0, 1.0).unwrap(), 4, 1.0).unwrap();
        let expected = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (x, e) in m.nodes.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_grading_example() {
        // s = i/4; left half 0.5 (2s)^2, right half mirrored.
        let m = build_graded_mesh(&Domain::interval(0.0, 1.0).unwrap(), 4, 2.0).unwrap();
        let expected = [0.0, 0.125, 0.5, 0.875, 1.0];
        for (x, e) in m.nodes.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15, "{x} vs {e}");
        }
    }

    #[test]
    fn radial_grading_example() {
        let m = build_graded_mesh(&Domain::ball(1.0, 3).unwrap(), 8, 2.0).unwrap();
        for (i, &r) in m.nodes.iter().enumerate() {
            let s = i as f64 / 8.0;
            assert!((r - (1.0 - (1.0 - s).powi(2))).abs() < 1e-15);
        }
        let h = m.spacings();
        assert!(h.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(m.boundary_nodes, vec![8]);
    }

    #[test]
    fn uniform_refinement_nests() {
        let dom = Domain::interval(-1.0, 2.0).unwrap();
        let coarse = build_graded_mesh(&dom, 8, 1.0).unwrap();
        let fine = build_graded_mesh(&dom, 16, 1.0).unwrap();
        for (i, x) in coarse.nodes.iter().enumerate() {
            assert!((fine.nodes[2 * i] - x).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn meshes_are_monotone_with_boundary_endpoints(
            n in 4usize..200, g in 1.0f64..4.0, ball in any::<bool>()
        ) {
            let dom = if ball { Domain::ball(1.5, 3).unwrap() } else { Domain::interval(-0.5, 1.0).unwrap() };
            let m = build_graded_mesh(&dom, n, g).unwrap();
            prop_assert!(m.nodes.windows(2).all(|w| w[1] > w[0]));
            let d = m.distances();
            for &b in &m.boundary_nodes {
                prop_assert_eq!(d[b], 0.0);
            }
            // finest spacing sits next to the boundary
            let h = m.spacings();
            let near = match dom { Domain::Interval{..} => h[0], Domain::Ball{..} => h[n - 1] };
            prop_assert!(near <= m.max_spacing() + 1e-15);
        }

        #[test]
        fn distance_is_one_lipschitz(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let dom = Domain::interval(0.0, 1.0).unwrap();
            let dx = distance_to_boundary(&dom, x).unwrap();
            let dy = distance_to_boundary(&dom, y).unwrap();
            prop_assert!((dx - dy).abs() <= (x - y).abs() + 1e-15);
            let ball = Domain::ball(1.0, 2).unwrap();
            let bx = distance_to_boundary(&ball, x).unwrap();
            let by = distance_to_boundary(&ball, y).unwrap();
            prop_assert!((bx - by).abs() <= (x - y).abs() + 1e-15);
        }
    }
}
