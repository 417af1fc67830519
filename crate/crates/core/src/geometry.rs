//! Exact Euclidean distance transform, connected-component labeling, enclosed
//! hole detection and interface bands.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, FloatMap};

/// Euclidean distance (pixels) from every pixel to the nearest feature pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    squared: Vec<u64>,
    distances: FloatMap,
}

impl DistanceField {
    /// Exact integer squared distances, row-major.
    pub fn squared(&self) -> &[u64] {
        &self.squared
    }

    pub fn map(&self) -> &FloatMap {
        &self.distances
    }

    pub fn dims(&self) -> (usize, usize) {
        self.distances.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.distances.get(x, y)
    }
}

/// Lower envelope of the parabolas `(p - q)^2 + f[q]` over the finite samples
/// of `f`, evaluated at every integer `p`. `None` marks "no feature". All
/// breakpoint comparisons are done on exact rationals.
fn envelope_1d(f: &[Option<u64>], out: &mut [Option<u64>]) {
    let sites: Vec<(i64, i128)> = f
        .iter()
        .enumerate()
        .filter_map(|(q, v)| v.map(|v| (q as i64, v as i128)))
        .collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = None);
        return;
    }
    // Intersection abscissa of parabolas at sites a < b, as numerator / denominator.
    let cross = |a: (i64, i128), b: (i64, i128)| -> (i128, i128) {
        let (qa, fa) = (a.0 as i128, a.1);
        let (qb, fb) = (b.0 as i128, b.1);
        ((fb + qb * qb) - (fa + qa * qa), 2 * (qb - qa))
    };
    // s1 = n1/d1 <= s2 = n2/d2 with positive denominators
    let le = |(n1, d1): (i128, i128), (n2, d2): (i128, i128)| n1 * d2 <= n2 * d1;

    let mut hull: Vec<(i64, i128)> = Vec::with_capacity(sites.len());
    for &site in &sites {
        while hull.len() >= 2 {
            let k = hull.len();
            if le(cross(hull[k - 1], site), cross(hull[k - 2], hull[k - 1])) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(site);
    }

    let mut k = 0;
    for (p, slot) in out.iter_mut().enumerate() {
        let p128 = p as i128;
        while k + 1 < hull.len() {
            let (n, d) = cross(hull[k], hull[k + 1]);
            // advance while the next breakpoint lies strictly left of p
            if n < p128 * d {
                k += 1;
            } else {
                break;
            }
        }
        let (q, fq) = hull[k];
        let dx = p as i128 - q as i128;
        *slot = Some((dx * dx + fq) as u64);
    }
}

/// Exact EDT: one 1-D pass along rows, then one along columns.
pub fn distance_transform(features: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = features.dims();
    if features.count() == 0 {
        return Err(Error::NoFeatures);
    }
    let mut rows: Vec<Option<u64>> = vec![None; w * h];
    let mut line_in: Vec<Option<u64>> = vec![None; w.max(h)];
    let mut line_out: Vec<Option<u64>> = vec![None; w.max(h)];
    for y in 0..h {
        for x in 0..w {
            line_in[x] = features.is_set(x, y).then_some(0);
        }
        envelope_1d(&line_in[..w], &mut line_out[..w]);
        rows[y * w..(y + 1) * w].copy_from_slice(&line_out[..w]);
    }
    let mut squared = vec![0u64; w * h];
    for x in 0..w {
        for y in 0..h {
            line_in[y] = rows[y * w + x];
        }
        envelope_1d(&line_in[..h], &mut line_out[..h]);
        for y in 0..h {
            squared[y * w + x] = line_out[y].expect("at least one feature exists");
        }
    }
    let distances = squared.iter().map(|&d| (d as f64).sqrt()).collect();
    Ok(DistanceField {
        squared,
        distances: FloatMap::from_parts_unchecked(w, h, distances),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    /// Already-visited neighbors in a row-major raster scan.
    fn backward_offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::invalid(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }
}

/// Component labels: 0 for unlabeled pixels, 1..=count otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Number of components.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Pixel count per label; index 0 holds the unlabeled pixels.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.count + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Mask of one component.
    pub fn component_mask(&self, label: u32) -> BinaryMask {
        let flags: Vec<bool> = self.labels.iter().map(|&l| l == label && label != 0).collect();
        BinaryMask::from_flags(self.width, self.height, &flags).expect("label map dims are valid")
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        match ra.cmp(&rb) {
            Ordering::Less => self.parent[rb as usize] = ra,
            Ordering::Greater => self.parent[ra as usize] = rb,
            Ordering::Equal => {}
        }
    }
}

fn label_where(width: usize, height: usize, on: impl Fn(usize) -> bool, conn: Connectivity) -> LabelMap {
    let mut provisional = vec![0u32; width * height];
    let mut uf = UnionFind::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !on(i) {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in conn.backward_offsets() {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 {
                    continue;
                }
                let n = provisional[ny as usize * width + nx as usize];
                if n == 0 {
                    continue;
                }
                if current == 0 {
                    current = n;
                } else if current != n {
                    uf.union(current, n);
                }
            }
            provisional[i] = if current == 0 { uf.make() } else { current };
        }
    }

    // Renumber roots in order of first appearance along the raster scan.
    let mut renumber = vec![0u32; uf.parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; width * height];
    for (i, &p) in provisional.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = uf.find(p) as usize;
        if renumber[root] == 0 {
            count += 1;
            renumber[root] = count;
        }
        labels[i] = renumber[root];
    }
    LabelMap {
        width,
        height,
        labels,
        count: count as usize,
    }
}

/// Two-pass union-find labeling of the 255 pixels.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = mask.dims();
    label_where(w, h, |i| mask.is_set_index(i), connectivity)
}

/// Background components that do not touch the border, labeled
/// 4-connected (the dual of 8-connected foreground).
pub fn label_holes(deposit: &BinaryMask) -> LabelMap {
    let (w, h) = deposit.dims();
    let background = label_where(w, h, |i| !deposit.is_set_index(i), Connectivity::Four);
    let mut touches_border = vec![false; background.count + 1];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches_border[background.get(x, y) as usize] = true;
            }
        }
    }
    let enclosed = |i: usize| {
        let l = background.labels[i];
        l != 0 && !touches_border[l as usize]
    };
    label_where(w, h, enclosed, Connectivity::Four)
}

/// Enclosed voids: background pixels not connected to the image border.
pub fn find_holes(deposit: &BinaryMask) -> BinaryMask {
    let holes = label_holes(deposit);
    let flags: Vec<bool> = holes.labels.iter().map(|&l| l != 0).collect();
    BinaryMask::from_flags(holes.width, holes.height, &flags).expect("dims come from a valid mask")
}

/// Holes of at least `min_area` pixels.
pub fn count_holes(deposit: &BinaryMask, min_area: usize) -> usize {
    label_holes(deposit).areas().iter().skip(1).filter(|&&a| a >= min_area).count()
}

/// Pixels within `width` of an edge pixel.
pub fn interface_band(edges: &BinaryMask, width: f64) -> Result<BinaryMask> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("band width must be > 0, got {width}")));
    }
    let dist = distance_transform(edges)?;
    Ok(band_from_distance(&dist, width))
}

pub fn band_from_distance(dist: &DistanceField, width: f64) -> BinaryMask {
    let (w, h) = dist.dims();
    let flags: Vec<bool> = dist.map().data().iter().map(|&d| d <= width).collect();
    BinaryMask::from_flags(w, h, &flags).expect("dims come from a valid field")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pso::Prng;
    use proptest::prelude::*;

    fn random_mask(rng: &mut Prng, w: usize, h: usize, density: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.next_unit() < density).unwrap()
    }

    fn brute_force_sq(mask: &BinaryMask) -> Vec<u64> {
        let (w, h) = mask.dims();
        let feats: Vec<(i64, i64)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.is_set(x, y))
            .map(|(x, y)| (x as i64, y as i64))
            .collect();
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                out.push(
                    feats
                        .iter()
                        .map(|&(fx, fy)| ((fx - x).pow(2) + (fy - y).pow(2)) as u64)
                        .min()
                        .unwrap(),
                );
            }
        }
        out
    }

    fn flood_fill_count(mask: &BinaryMask, conn: Connectivity) -> usize {
        let (w, h) = mask.dims();
        let mut seen = vec![false; w * h];
        let offsets: &[(i64, i64)] = match conn {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        };
        fn fill(x: i64, y: i64, w: usize, h: usize, m: &BinaryMask, seen: &mut [bool], off: &[(i64, i64)]) {
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                return;
            }
            let i = y as usize * w + x as usize;
            if seen[i] || !m.is_set_index(i) {
                return;
            }
            seen[i] = true;
            for &(dx, dy) in off {
                fill(x + dx, y + dy, w, h, m, seen, off);
            }
        }
        let mut count = 0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if mask.is_set_index(i) && !seen[i] {
                    count += 1;
                    fill(x as i64, y as i64, w, h, mask, &mut seen, offsets);
                }
            }
        }
        count
    }

    #[test]
    fn empty_features_error() {
        let m = BinaryMask::empty(4, 4).unwrap();
        let err = distance_transform(&m).unwrap_err();
        assert!(matches!(err, Error::NoFeatures));
        assert!(err.to_string().contains("no features"));
    }

    #[test]
    fn all_features_give_zero() {
        let m = BinaryMask::from_fn(5, 3, |_, _| true).unwrap();
        assert!(distance_transform(&m).unwrap().squared().iter().all(|&d| d == 0));
    }

    #[test]
    fn single_corner_feature() {
        let m = BinaryMask::from_fn(3, 3, |x, y| x == 0 && y == 0).unwrap();
        let d = distance_transform(&m).unwrap();
        assert_eq!(d.get(2, 2), 2.0 * 2f64.sqrt());
        assert_eq!(d.squared(), &[0, 1, 4, 1, 2, 5, 4, 5, 8]);
    }

    #[test]
    fn edt_matches_brute_force_on_random_masks() {
        let mut rng = Prng::new(2024);
        for i in 0..60 {
            let density = [0.002, 0.02, 0.2, 0.6][i % 4];
            let mut m = random_mask(&mut rng, 17 + i % 5, 13 + i % 7, density);
            if m.count() == 0 {
                m = BinaryMask::from_fn(m.width(), m.height(), |x, y| x == 3 && y == 2).unwrap();
            }
            assert_eq!(distance_transform(&m).unwrap().squared(), brute_force_sq(&m).as_slice());
        }
    }

    #[test]
    fn distance_field_is_lipschitz() {
        let mut rng = Prng::new(8);
        let m = random_mask(&mut rng, 30, 30, 0.01);
        let d = distance_transform(&m).unwrap();
        for y in 0..29 {
            for x in 0..29 {
                let p = d.get(x, y);
                assert!((p - d.get(x + 1, y)).abs() <= 1.0 + 1e-12);
                assert!((p - d.get(x, y + 1)).abs() <= 1.0 + 1e-12);
                assert!((p - d.get(x + 1, y + 1)).abs() <= 2f64.sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_pixels_and_connectivity() {
        let m = BinaryMask::from_fn(2, 2, |x, y| x == y).unwrap();
        assert_eq!(connected_components(&m, Connectivity::Four).count(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&BinaryMask::empty(3, 3).unwrap(), Connectivity::Eight).count(), 0);
    }

    #[test]
    fn labels_follow_first_encounter_order() {
        // U shape: the two arms merge at the bottom, so both get label 1.
        let m = BinaryMask::new(
            4,
            3,
            vec![255, 0, 255, 0, 255, 0, 255, 0, 255, 255, 255, 255],
        )
        .unwrap();
        let l = connected_components(&m, Connectivity::Four);
        assert_eq!(l.count(), 1);
        assert_eq!(l.get(2, 0), 1);
        let m = BinaryMask::new(3, 2, vec![0, 0, 255, 255, 0, 0]).unwrap();
        let l = connected_components(&m, Connectivity::Four);
        assert_eq!(l.get(2, 0), 1);
        assert_eq!(l.get(0, 1), 2);
    }

    #[test]
    fn component_count_matches_flood_fill() {
        let mut rng = Prng::new(77);
        for i in 0..200 {
            let m = random_mask(&mut rng, 16, 16, 0.15 + 0.4 * (i % 5) as f64 / 5.0);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let l = connected_components(&m, conn);
                assert_eq!(l.count(), flood_fill_count(&m, conn));
                assert_eq!(l.labels().iter().filter(|&&v| v != 0).count(), m.count());
            }
        }
    }

    #[test]
    fn connectivity_parses() {
        assert_eq!(Connectivity::try_from(4).unwrap(), Connectivity::Four);
        assert!(Connectivity::try_from(6).is_err());
    }

    #[test]
    fn holes_of_solid_and_hollow_rectangles() {
        let solid = BinaryMask::from_fn(10, 10, |x, y| (2..8).contains(&x) && (2..8).contains(&y)).unwrap();
        assert_eq!(find_holes(&solid).count(), 0);
        let hollow = BinaryMask::from_fn(10, 10, |x, y| {
            (1..9).contains(&x) && (1..9).contains(&y) && !((4..7).contains(&x) && (4..7).contains(&y))
        })
        .unwrap();
        let holes = find_holes(&hollow);
        assert_eq!(holes.count(), 9);
        assert!(holes.is_set(4, 4) && holes.is_set(6, 6) && !holes.is_set(3, 3));
        assert_eq!(count_holes(&hollow, 1), 1);
        assert_eq!(count_holes(&hollow, 10), 0);
    }

    #[test]
    fn border_background_is_never_a_hole() {
        // cavity opening onto the border
        let m = BinaryMask::from_fn(6, 6, |x, y| !(x == 0 && y == 3) && !(x == 1 && y == 3)).unwrap();
        assert_eq!(find_holes(&m).count(), 0);
    }

    #[test]
    fn band_examples() {
        let edges = BinaryMask::from_fn(20, 5, |x, _| x == 10).unwrap();
        let band = interface_band(&edges, 0.5).unwrap();
        assert_eq!(band, edges);
        let band = interface_band(&edges, 2.0).unwrap();
        for y in 0..5 {
            let xs: Vec<usize> = (0..20).filter(|&x| band.is_set(x, y)).collect();
            assert_eq!(xs, vec![8, 9, 10, 11, 12]);
        }
        assert!(interface_band(&edges, 0.0).is_err());
        assert!(interface_band(&BinaryMask::empty(3, 3).unwrap(), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn holes_are_background(seed in any::<u64>(), d in 0.2f64..0.9) {
            let mut rng = Prng::new(seed);
            let m = random_mask(&mut rng, 14, 11, d);
            let holes = find_holes(&m);
            for i in 0..m.len() {
                prop_assert!(!(holes.is_set_index(i) && m.is_set_index(i)));
            }
        }

        #[test]
        fn band_area_grows_with_width(seed in any::<u64>(), a in 0.1f64..10.0, b in 0.1f64..10.0) {
            let mut rng = Prng::new(seed);
            let mut m = random_mask(&mut rng, 20, 20, 0.02);
            if m.count() == 0 {
                m = BinaryMask::from_fn(20, 20, |x, y| x == 5 && y == 5).unwrap();
            }
            let small = interface_band(&m, a.min(b)).unwrap();
            let large = interface_band(&m, a.max(b)).unwrap();
            prop_assert!(small.count() <= large.count());
            for i in 0..m.len() {
                prop_assert!(!small.is_set_index(i) || large.is_set_index(i));
            }
        }
    }
}
