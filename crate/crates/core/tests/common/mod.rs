//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// `1/2 |w|^2 + lambda * sum_{i>j} max(0, 1 - w.(d_i - d_j))`, by direct
/// summation over all ordered pairs.
pub fn objective(d: &[Vec<f64>], w: &[f64], lambda: f64) -> f64 {
    let reg: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let mut loss = 0.0;
    for i in 0..d.len() {
        for j in 0..i {
            let margin: f64 = w
                .iter()
                .zip(d[i].iter().zip(&d[j]))
                .map(|(w, (a, b))| w * (a - b))
                .sum();
            loss += (1.0 - margin).max(0.0);
        }
    }
    reg + lambda * loss
}

/// Running means `d_t = (1/t) sum_{s<=t} x_s`.
pub fn running_mean(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut acc = vec![0.0; x[0].len()];
    x.iter()
        .enumerate()
        .map(|(t, row)| {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
            acc.iter().map(|a| a / (t + 1) as f64).collect()
        })
        .collect()
}

/// Dense grid search of a 1-D or 2-D function over `[-bound, bound]^dim`:
/// a full grid, then repeated zooms around the incumbent until the step is
/// at most `final_step`. Returns the best value found.
pub fn grid_minimum(dim: usize, bound: f64, final_step: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    assert!(dim == 1 || dim == 2);
    let mut centre = vec![0.0; dim];
    let mut half = bound;
    let mut points = 400usize;
    let mut best = f64::INFINITY;
    loop {
        let step = 2.0 * half / points as f64;
        let mut incumbent = centre.clone();
        let axis: Vec<Vec<f64>> = centre
            .iter()
            .map(|c| (0..=points).map(|i| c - half + i as f64 * step).collect())
            .collect();
        if dim == 1 {
            for &x in &axis[0] {
                let v = f(&[x]);
                if v < best {
                    best = v;
                    incumbent = vec![x];
                }
            }
        } else {
            for &x in &axis[0] {
                for &y in &axis[1] {
                    let v = f(&[x, y]);
                    if v < best {
                        best = v;
                        incumbent = vec![x, y];
                    }
                }
            }
        }
        if step <= final_step {
            return best;
        }
        centre = incumbent;
        half = 4.0 * step;
        points = 80;
    }
}

pub fn brute_jaccard_class(truth: &[Option<u32>], pred: &[Option<u32>], class: u32) -> f64 {
    let g: BTreeSet<usize> = (0..truth.len()).filter(|&i| truth[i] == Some(class)).collect();
    let p: BTreeSet<usize> = (0..pred.len()).filter(|&i| pred[i] == Some(class)).collect();
    let union = g.union(&p).count();
    if union == 0 {
        0.0
    } else {
        g.intersection(&p).count() as f64 / union as f64
    }
}

pub fn brute_jaccard_sequence(truth: &[Option<u32>], pred: &[Option<u32>]) -> f64 {
    let mut true_classes = Vec::new();
    let mut all_classes = Vec::new();
    for l in truth.iter().flatten() {
        if !true_classes.contains(l) {
            true_classes.push(*l);
        }
    }
    for l in truth.iter().chain(pred).flatten() {
        if !all_classes.contains(l) {
            all_classes.push(*l);
        }
    }
    if true_classes.is_empty() {
        return 0.0;
    }
    all_classes.sort_unstable();
    let mut sum = 0.0;
    for c in all_classes {
        sum += brute_jaccard_class(truth, pred, c);
    }
    sum / true_classes.len() as f64
}

pub fn brute_recognition(pairs: &[(u32, u32)]) -> f64 {
    let mut hits = 0;
    for &(p, t) in pairs {
        if p == t {
            hits += 1;
        }
    }
    hits as f64 / pairs.len() as f64
}

/// Count of window starts `t = 0, S, 2S, ...` with `t + M <= n`, or 1 for
/// inputs shorter than a window.
pub fn brute_layer_len(n: usize, m: usize, s: usize) -> usize {
    if n < m {
        return 1;
    }
    let mut count = 0;
    let mut t = 0;
    while t + m <= n {
        count += 1;
        t += s;
    }
    count
}

pub fn iou(pred: &[bool], truth: &[bool]) -> (usize, usize) {
    let inter = pred.iter().zip(truth).filter(|(a, b)| **a && **b).count();
    let union = pred.iter().zip(truth).filter(|(a, b)| **a || **b).count();
    (inter, union)
}
