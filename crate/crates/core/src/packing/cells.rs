use super::{Point, PufMask};

/// Uniform bucket grid over `[0, L)²` with cells at least `cutoff` wide.
pub(crate) struct CellGrid {
    n: usize,
    width: f64,
    periodic: bool,
    buckets: Vec<Vec<u32>>,
}

impl CellGrid {
    pub(crate) fn new(side: f64, cutoff: f64, periodic: bool) -> Self {
        let n = ((side / cutoff).floor() as usize).max(1);
        Self {
            n,
            width: side / n as f64,
            periodic,
            buckets: vec![Vec::new(); n * n],
        }
    }

    pub(crate) fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x / self.width) as usize).min(self.n - 1);
        let cy = ((p.y / self.width) as usize).min(self.n - 1);
        (cx, cy)
    }

    pub(crate) fn insert(&mut self, p: Point, id: u32) {
        let (cx, cy) = self.cell_of(p);
        self.buckets[cy * self.n + cx].push(id);
    }

    /// Distinct cells of the 3x3 block around `(cx, cy)`.
    pub(crate) fn neighborhood(&self, cx: usize, cy: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n as isize;
        let mut cells = [usize::MAX; 9];
        let mut k = 0;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (mut x, mut y) = (cx as isize + dx, cy as isize + dy);
                if self.periodic {
                    x = x.rem_euclid(n);
                    y = y.rem_euclid(n);
                } else if x < 0 || y < 0 || x >= n || y >= n {
                    continue;
                }
                let id = (y * n + x) as usize;
                if !cells[..k].contains(&id) {
                    cells[k] = id;
                    k += 1;
                }
            }
        }
        cells.into_iter().take(k)
    }

    pub(crate) fn bucket(&self, cell: usize) -> &[u32] {
        &self.buckets[cell]
    }
}

fn build(mask: &PufMask, cutoff: f64) -> CellGrid {
    let mut grid = CellGrid::new(mask.side_um, cutoff, mask.periodic);
    for (i, &p) in mask.centers.iter().enumerate() {
        grid.insert(p, i as u32);
    }
    grid
}

/// Counts pairs whose center distance is below `2r - tol_um`.
pub fn overlapping_pairs(mask: &PufMask, tol_um: f64) -> usize {
    let d = 2.0 * mask.radius_um();
    let limit = (d - tol_um).max(0.0);
    let limit_sq = limit * limit;
    let grid = build(mask, d.max(1e-9));
    let mut count = 0;
    for (i, &p) in mask.centers.iter().enumerate() {
        let (cx, cy) = grid.cell_of(p);
        for cell in grid.neighborhood(cx, cy) {
            for &j in grid.bucket(cell) {
                let j = j as usize;
                if j > i && mask.distance_sq(p, mask.centers[j]) < limit_sq {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Smallest center-to-center distance, or `None` for fewer than two discs.
///
/// Pairs farther apart than one cell (at least `2r`) are not examined, so a
/// result of `Some(d)` with `d >= 2r` is only a lower bound on the true gap.
pub fn min_pair_distance(mask: &PufMask) -> Option<f64> {
    if mask.centers.len() < 2 {
        return None;
    }
    let d = 2.0 * mask.radius_um();
    let grid = build(mask, d.max(1e-9));
    let mut best = f64::INFINITY;
    for (i, &p) in mask.centers.iter().enumerate() {
        let (cx, cy) = grid.cell_of(p);
        for cell in grid.neighborhood(cx, cy) {
            for &j in grid.bucket(cell) {
                let j = j as usize;
                if j > i {
                    best = best.min(mask.distance_sq(p, mask.centers[j]));
                }
            }
        }
    }
    Some(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::GeneratorTag;
    use super::*;

    fn brute_overlaps(mask: &PufMask, tol: f64) -> usize {
        let lim = 2.0 * mask.radius_um() - tol;
        let mut c = 0;
        for i in 0..mask.centers.len() {
            for j in i + 1..mask.centers.len() {
                if mask.distance_sq(mask.centers[i], mask.centers[j]).sqrt() < lim {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn grid_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3, 99, 0);
        for periodic in [true, false] {
            let centers = (0..300)
                .map(|_| Point::new(rng.gen::<f64>() * 5.0, rng.gen::<f64>() * 5.0))
                .collect();
            let m = PufMask {
                side_um: 5.0,
                radius_nm: 150.0,
                centers,
                periodic,
                seed: 0,
                tag: GeneratorTag::Derived,
            };
            assert_eq!(overlapping_pairs(&m, 0.0), brute_overlaps(&m, 0.0));
        }
    }

    #[test]
    fn tiny_box_dedups_cells() {
        let m = PufMask {
            side_um: 1.0,
            radius_nm: 200.0,
            centers: vec![Point::new(0.1, 0.1), Point::new(0.9, 0.1)],
            periodic: true,
            seed: 0,
            tag: GeneratorTag::Derived,
        };
        // wrapped distance 0.2 < 0.4
        assert_eq!(overlapping_pairs(&m, 0.0), 1);
        assert!((min_pair_distance(&m).unwrap() - 0.2).abs() < 1e-12);
    }
}
