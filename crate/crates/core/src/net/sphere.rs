use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::random_unit;
use crate::error::{check_dim, MfError, Result};

/// Greedy farthest-point eps' delta-net of the sphere of radius delta
/// centered at (1 - delta) v. The first point is v itself. With `limit`
/// the construction stops after that many points.
pub fn sphere_net(
    v: &DVector<f64>,
    delta: f64,
    eps_prime: f64,
    big_d: usize,
    limit: Option<usize>,
) -> Result<Vec<DVector<f64>>> {
    check_dim(big_d, v.len())?;
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(MfError::invalid("sphere-net center direction must be a unit vector"));
    }
    if !(eps_prime * delta > 0.0) || !(delta < 1.0) {
        return Err(MfError::invalid("sphere net needs eps' delta > 0 and delta < 1"));
    }
    let limit = limit.unwrap_or(usize::MAX).max(1);
    // Unit-sphere candidates and the distance from any sphere point to them.
    let (cands, resolution) = if big_d == 2 {
        let perp = DVector::from_column_slice(&[-v[1], v[0]]);
        let k = ((16.0 * PI / eps_prime).ceil() as usize).max(64);
        let c: Vec<DVector<f64>> = (0..k)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / k as f64;
                v * a.cos() + &perp * a.sin()
            })
            .collect();
        (c, 2.0 * (PI / (2.0 * k as f64)).sin())
    } else {
        let want = (40.0 * super::volumetric_net_size(big_d, eps_prime)? as f64).clamp(2000.0, 400_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0x7370_6865_7265 ^ big_d as u64);
        let c: Vec<DVector<f64>> = (0..want as usize).map(|_| random_unit(big_d, &mut rng)).collect();
        (c, 0.5 * eps_prime)
    };
    let target = (eps_prime - resolution).max(0.5 * eps_prime);
    let chosen = if big_d == 2 {
        greedy_ring(&cands, target, limit)
    } else {
        greedy(&cands, v, target, limit)
    };
    let center = v * (1.0 - delta);
    Ok(chosen.into_iter().map(|u| &center + u * delta).collect())
}

fn greedy(cands: &[DVector<f64>], v: &DVector<f64>, target: f64, limit: usize) -> Vec<DVector<f64>> {
    let mut chosen = vec![v.clone()];
    let mut mind: Vec<f64> = cands.iter().map(|c| (c - v).norm()).collect();
    while chosen.len() < limit {
        let (k, far) = mind
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        if far <= target {
            break;
        }
        let u = cands[k].clone();
        for (m, c) in mind.iter_mut().zip(cands) {
            let dist = (c - &u).norm();
            if dist < *m {
                *m = dist;
            }
        }
        chosen.push(u);
    }
    chosen
}

/// Same selection as `greedy` for candidates evenly spaced on a circle,
/// starting at index 0. Distances grow with index offset up to the
/// antipode, so an update stops at the first candidate no closer than the
/// current farthest distance; a lazy heap finds the next farthest.
fn greedy_ring(cands: &[DVector<f64>], target: f64, limit: usize) -> Vec<DVector<f64>> {
    let k = cands.len();
    let mut mind: Vec<f64> = cands.iter().map(|c| (c - &cands[0]).norm()).collect();
    let mut heap: BinaryHeap<(u64, Reverse<usize>)> = mind.iter().enumerate().map(|(i, m)| (m.to_bits(), Reverse(i))).collect();
    let mut chosen = vec![cands[0].clone()];
    while chosen.len() < limit {
        let (far, idx) = loop {
            match heap.peek() {
                Some(&(bits, Reverse(i))) if bits != mind[i].to_bits() => {
                    heap.pop();
                }
                Some(&(bits, Reverse(i))) => break (f64::from_bits(bits), i),
                None => return chosen,
            }
        };
        if far <= target {
            break;
        }
        let u = &cands[idx];
        for step in [1isize, -1] {
            let mut off = 0isize;
            loop {
                let j = (idx as isize + step * off).rem_euclid(k as isize) as usize;
                let dist = (&cands[j] - u).norm();
                if dist >= far || off > k as isize / 2 {
                    break;
                }
                if dist < mind[j] {
                    mind[j] = dist;
                    heap.push((dist.to_bits(), Reverse(j)));
                }
                off += 1;
            }
        }
        chosen.push(u.clone());
    }
    chosen
}
