//! Fast marching over an unstructured cloud.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;

use super::cloud::{NodeKind, SolveCloud};
use super::update::{local_update, update_with, Accepted, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Known,
    Trial,
    Far,
}

/// Travel cost at every node: goals start KNOWN at 0, walls stay untouched,
/// free nodes are accepted in order of increasing value. Nodes never reached
/// keep `+inf`.
pub(crate) fn march(cloud: &SolveCloud, kind: &[NodeKind], speed: &[f64], phi_wall: f64) -> Vec<f64> {
    march_with(cloud, kind, speed, phi_wall, true)
}

fn march_with(cloud: &SolveCloud, kind: &[NodeKind], speed: &[f64], phi_wall: f64, incremental: bool) -> Vec<f64> {
    let n = cloud.len();
    let mut phi = vec![f64::INFINITY; n];
    let mut label = vec![Label::Far; n];
    let mut heap: BinaryHeap<Reverse<(OrderedFloat<f64>, usize)>> = BinaryHeap::new();
    let mut scratch = Scratch::default();

    for i in 0..n {
        match kind[i] {
            NodeKind::Goal => {
                phi[i] = 0.0;
                label[i] = Label::Known;
            }
            NodeKind::Wall => phi[i] = phi_wall,
            NodeKind::Free => {}
        }
    }
    // accepted non-ghost neighbours of every free node, for incremental updates
    let mut accepted: Vec<Vec<Accepted>> = vec![Vec::new(); if incremental { n } else { 0 }];
    let record = |accepted: &mut Vec<Vec<Accepted>>, i: usize, k: usize, phi_i: f64| {
        if incremental && !cloud.ghost[i] {
            accepted[k].push((i as u32, phi_i, cloud.points[i] - cloud.points[k]));
        }
    };
    for i in 0..n {
        if kind[i] != NodeKind::Goal {
            continue;
        }
        for &k in cloud.neighbors.neighbors(i) {
            let k = k as usize;
            if kind[k] != NodeKind::Free {
                continue;
            }
            if label[k] == Label::Far {
                label[k] = Label::Trial;
                let v = local_update(k, cloud, &phi, speed[k], |j| label[j] == Label::Known, &mut scratch);
                phi[k] = v;
                heap.push(Reverse((OrderedFloat(v), k)));
            }
            record(&mut accepted, i, k, 0.0);
        }
    }

    while let Some(Reverse((OrderedFloat(v), i))) = heap.pop() {
        if label[i] == Label::Known || v != phi[i] {
            continue;
        }
        label[i] = Label::Known;
        for &k in cloud.neighbors.neighbors(i) {
            let k = k as usize;
            if kind[k] != NodeKind::Free || label[k] == Label::Known {
                continue;
            }
            let cand = if incremental {
                update_with(k, i, &accepted[k], cloud, &phi, speed[k])
            } else {
                local_update(k, cloud, &phi, speed[k], |j| label[j] == Label::Known, &mut scratch)
            };
            record(&mut accepted, i, k, phi[i]);
            if cand < phi[k] {
                phi[k] = cand;
                label[k] = Label::Trial;
                heap.push(Reverse((OrderedFloat(cand), k)));
            }
        }
    }
    phi
}
