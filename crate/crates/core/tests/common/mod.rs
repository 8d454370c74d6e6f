//! Helpers shared by the integration tests: a brute-force convex hull and a
//! rank correlation, both kept deliberately simple so they can serve as
//! independent references.

#![allow(dead_code)]

use blocksworld::{Point3, TriMesh, Vec3};

/// Convex hull of points in general position by checking every triple: a
/// triangle is a hull face when all other points lie on one side of its
/// plane. Faces are wound outward. O(n⁴), fine for a few dozen points.
pub fn brute_force_hull(points: &[Point3]) -> TriMesh {
    let n = points.len();
    let scale = points.iter().map(|p| p.coords.norm()).fold(0.0, f64::max);
    let eps = 1e-9 * scale * scale;
    let mut faces = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let normal: Vec3 = (b - a).cross(&(c - a));
                let (mut above, mut below) = (false, false);
                for (m, p) in points.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let s = normal.dot(&(p - a));
                    above |= s > eps;
                    below |= s < -eps;
                }
                match (above, below) {
                    (false, true) => faces.push([i, j, k]),
                    (true, false) => faces.push([i, k, j]),
                    _ => {}
                }
            }
        }
    }
    // Keep only vertices that appear on the hull.
    let mut remap = vec![u32::MAX; n];
    let mut vertices = Vec::new();
    let faces = faces
        .into_iter()
        .map(|f| {
            f.map(|v| {
                if remap[v] == u32::MAX {
                    remap[v] = vertices.len() as u32;
                    vertices.push(points[v]);
                }
                remap[v]
            })
        })
        .collect();
    TriMesh::new(vertices, faces).expect("hull is a valid mesh")
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ties share the mean of their 1-based ranks.
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rank correlation: Pearson correlation of the ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
