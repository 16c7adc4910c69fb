use super::{Mask, MaskError, Result};

/// Closed outer boundary of one 8-connected component, as pixel coordinates
/// `(x, y)` in clockwise order starting at the component's topmost-leftmost
/// pixel. The closing edge back to the first pixel is implicit.
pub type Contour = Vec<(usize, usize)>;

/// Moore neighbourhood in clockwise screen order, starting west.
const OFFSETS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_of(dx: isize, dy: isize) -> usize {
    OFFSETS
        .iter()
        .position(|&o| o == (dx, dy))
        .expect("consecutive Moore neighbours are adjacent")
}

/// Outer boundaries of every 8-connected foreground component, ordered by
/// each component's topmost-leftmost pixel.
pub fn trace_contours(mask: &Mask) -> Vec<Contour> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) == 0 || seen[y * w + x] {
                continue;
            }
            // Row-major scan reaches a component at its topmost-leftmost
            // pixel; flood it so later pixels of it are skipped.
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for &(dx, dy) in &OFFSETS {
                    let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                    if mask.is_fg(nx, ny) {
                        let i = ny as usize * w + nx as usize;
                        if !seen[i] {
                            seen[i] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            out.push(trace_from(mask, (x, y)));
        }
    }
    out
}

fn trace_from(mask: &Mask, start: (usize, usize)) -> Contour {
    let step = |p: (usize, usize), back: usize| -> Option<((usize, usize), usize, usize)> {
        for i in 1..8 {
            let d = (back + i) % 8;
            let (dx, dy) = OFFSETS[d];
            let (nx, ny) = (p.0 as isize + dx, p.1 as isize + dy);
            if mask.is_fg(nx, ny) {
                let (px, py) = OFFSETS[(d + 7) % 8];
                // The last background cell checked, seen from the new pixel.
                let nb = dir_of(p.0 as isize + px - nx, p.1 as isize + py - ny);
                return Some(((nx as usize, ny as usize), nb, d));
            }
        }
        None
    };

    let mut contour = vec![start];
    let mut p = start;
    let mut back = 0;
    let mut first_move = None;
    while let Some((c, nb, d)) = step(p, back) {
        if p == start && first_move == Some(d) {
            contour.pop();
            break;
        }
        first_move.get_or_insert(d);
        contour.push(c);
        p = c;
        back = nb;
    }
    contour
}

/// Total closed-chain length: 1 per axis step, √2 per diagonal step.
pub fn perimeter(contours: &[Contour]) -> f64 {
    contours
        .iter()
        .map(|c| {
            if c.len() < 2 {
                return 0.0;
            }
            (0..c.len())
                .map(|i| {
                    let (a, b) = (c[i], c[(i + 1) % c.len()]);
                    if a.0 != b.0 && a.1 != b.1 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    }
                })
                .sum::<f64>()
        })
        .sum()
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull vertices of the given points (monotone chain), without
/// collinear points.
pub(crate) fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Area of the convex hull of foreground pixel centres plus half the hull
/// perimeter plus one, which approximates the pixel-area hull of the shape.
pub fn convex_hull_area(mask: &Mask) -> Result<f64> {
    let mut pts = Vec::new();
    for y in 0..mask.height() {
        let row = &mask.labels()[y * mask.width()..(y + 1) * mask.width()];
        let first = row.iter().position(|&v| v != 0);
        let last = row.iter().rposition(|&v| v != 0);
        if let (Some(a), Some(b)) = (first, last) {
            pts.push((a as i64, y as i64));
            pts.push((b as i64, y as i64));
        }
    }
    if pts.is_empty() {
        return Err(MaskError::EmptyForeground);
    }
    let hull = convex_hull(pts);
    let n = hull.len();
    let (mut twice_area, mut perim) = (0i64, 0.0);
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        twice_area += a.0 * b.1 - b.0 * a.1;
        perim += (((b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)) as f64).sqrt();
    }
    Ok(twice_area.abs() as f64 / 2.0 + 0.5 * perim + 1.0)
}
