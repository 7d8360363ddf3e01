//! Marching-squares contour extraction and the CSV/SVG emitters.

use crate::scalar::{real, Scalar};

use super::{BBox, Trajectory};

/// Edge identifier in the sampling grid: the grid point `(i, j)` plus a
/// direction (horizontal edge toward `i+1`, vertical toward `j+1`). Keys are
/// exact, so chains stitch without floating-point comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Extracts the level set `{f = level}` on a `resolution x resolution` grid
/// over the box, using marching squares with linear interpolation on cell
/// edges. Returns polylines as point lists; closed loops repeat their first
/// point at the end.
pub fn contour2d<T: Scalar>(
    f: impl Fn(&[T]) -> T,
    level: T,
    bbox: &BBox<T>,
    resolution: usize,
) -> Vec<Vec<[T; 2]>> {
    assert_eq!(bbox.nvars(), 2, "contour extraction needs a 2-D box");
    assert!(resolution >= 2);
    let nx = resolution;
    let ny = resolution;
    let sx = (bbox.max[0] - bbox.min[0]) / real::<T>((nx - 1) as f64);
    let sy = (bbox.max[1] - bbox.min[1]) / real::<T>((ny - 1) as f64);
    let coord = |i: usize, j: usize| -> [T; 2] {
        [
            bbox.min[0] + sx * real::<T>(i as f64),
            bbox.min[1] + sy * real::<T>(j as f64),
        ]
    };
    let mut values = vec![T::zero(); nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let p = coord(i, j);
            values[i * ny + j] = f(&p) - level;
        }
    }
    let val = |i: usize, j: usize| values[i * ny + j];

    // Interpolated crossing point on an edge.
    let cross = |e: Edge| -> [T; 2] {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let v0 = val(i0, j0);
        let v1 = val(i1, j1);
        let denom = v1 - v0;
        let t = if denom.abs() < real::<T>(1e-300) {
            real::<T>(0.5)
        } else {
            (-v0 / denom).max(T::zero()).min(T::one())
        };
        let p0 = coord(i0, j0);
        let p1 = coord(i1, j1);
        [p0[0] + (p1[0] - p0[0]) * t, p0[1] + (p1[1] - p0[1]) * t]
    };

    // Collect crossing segments per cell.
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let inside = |v: T| v < T::zero();
            let b0 = inside(val(i, j)) as usize;
            let b1 = inside(val(i + 1, j)) as usize;
            let b2 = inside(val(i + 1, j + 1)) as usize;
            let b3 = inside(val(i, j + 1)) as usize;
            let case = b0 | (b1 << 1) | (b2 << 2) | (b3 << 3);
            let bottom = Edge::H(i, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            let right = Edge::V(i + 1, j);
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 | 10 => {
                    // Saddle: disambiguate with the cell-center average.
                    let quarter = real::<T>(0.25);
                    let center =
                        (val(i, j) + val(i + 1, j) + val(i + 1, j + 1) + val(i, j + 1)) * quarter;
                    let center_inside = center < T::zero();
                    if (case == 5) == center_inside {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Stitch segments into polylines by shared edge keys.
    use std::collections::BTreeMap;
    let mut adjacency: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(k);
        adjacency.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        // Extend forward from the tail, then from the head.
        for dir in 0..2 {
            loop {
                let tip = if dir == 0 { *chain.last().unwrap() } else { chain[0] };
                let next = adjacency
                    .get(&tip)
                    .and_then(|list| list.iter().find(|&&k| !used[k]).copied());
                match next {
                    Some(k) => {
                        used[k] = true;
                        let (sa, sb) = segments[k];
                        let other = if sa == tip { sb } else { sa };
                        if dir == 0 {
                            chain.push(other);
                        } else {
                            chain.insert(0, other);
                        }
                    }
                    None => break,
                }
            }
        }
        polylines.push(chain.iter().map(|&e| cross(e)).collect());
    }
    polylines
}

/// CSV with header `x1,x2,polyline_id`.
pub fn contour_csv<T: Scalar>(polylines: &[Vec<[T; 2]>]) -> String {
    let mut out = String::from("x1,x2,polyline_id\n");
    for (id, line) in polylines.iter().enumerate() {
        for p in line {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], id));
        }
    }
    out
}

/// Minimal SVG: one path element per polyline inside a viewBox that matches
/// the sampling box.
pub fn contour_svg<T: Scalar>(polylines: &[Vec<[T; 2]>], bbox: &BBox<T>) -> String {
    let w = bbox.max[0] - bbox.min[0];
    let h = bbox.max[1] - bbox.min[1];
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        bbox.min[0], bbox.min[1], w, h
    );
    for line in polylines {
        if line.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (k, p) in line.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            d.push_str(&format!("{}{} {} ", cmd, p[0], p[1]));
        }
        out.push_str(&format!(
            "  <path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.01\"/>\n",
            d.trim_end()
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// CSV with header `t,x1,...,xn,status`; trajectories are concatenated and
/// separated by their `t` column restarting at zero.
pub fn trajectories_csv<T: Scalar>(trajs: &[(Trajectory<T>, String)], nvars: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=nvars {
        out.push_str(&format!(",x{}", i));
    }
    out.push_str(",status\n");
    for (traj, status) in trajs {
        for (t, state) in traj.times.iter().zip(&traj.states) {
            out.push_str(&format!("{}", t));
            for v in state {
                out.push_str(&format!(",{}", v));
            }
            out.push_str(&format!(",{}\n", status));
        }
    }
    out
}
