//! Bounding-volume hierarchy over the spherical caps of a triangulation.

use crate::linalg::vec3::{self, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct Aabb<T> {
    pub lo: Vec3<T>,
    pub hi: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    fn union(&self, o: &Aabb<T>) -> Aabb<T> {
        Aabb {
            lo: [0, 1, 2].map(|k| self.lo[k].min(o.lo[k])),
            hi: [0, 1, 2].map(|k| self.hi[k].max(o.hi[k])),
        }
    }

    pub fn contains(&self, x: Vec3<T>) -> bool {
        (0..3).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }
}

/// Box around the spherical triangle spanned by three unit vectors: the
/// smallest cap around their normalized centroid, boxed per axis.
pub fn cap_box<T: Real>(v: [Vec3<T>; 3]) -> Aabb<T> {
    let c = vec3::normalize(vec3::add(vec3::add(v[0], v[1]), v[2]));
    let cos_r = v.iter().map(|&p| vec3::dot(p, c)).fold(T::one(), T::min);
    let r = cos_r.max(-T::one()).min(T::one()).acos();
    let slack = T::c(SLACK);
    if r >= T::FRAC_PI_2() {
        // not geodesically convex; fall back to the whole sphere
        return Aabb { lo: [-T::one() - slack; 3], hi: [T::one() + slack; 3] };
    }
    let mut lo = [T::zero(); 3];
    let mut hi = [T::zero(); 3];
    for k in 0..3 {
        let ang = c[k].max(-T::one()).min(T::one()).acos();
        hi[k] = if ang <= r { T::one() } else { (ang - r).cos() };
        lo[k] = if T::PI() - ang <= r { -T::one() } else { (ang + r).cos() };
        hi[k] += slack;
        lo[k] -= slack;
    }
    Aabb { lo, hi }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { bounds: Aabb<T>, faces: Vec<usize> },
    Inner { bounds: Aabb<T>, children: [usize; 2] },
}

#[derive(Debug, Clone)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Bvh<T> {
    pub fn build(boxes: &[Aabb<T>]) -> Self {
        let centers: Vec<Vec3<T>> =
            boxes.iter().map(|b| [0, 1, 2].map(|k| (b.lo[k] + b.hi[k]) * T::c(0.5))).collect();
        let mut bvh = Bvh { nodes: Vec::new() };
        let ids: Vec<usize> = (0..boxes.len()).collect();
        bvh.build_node(boxes, &centers, ids);
        bvh
    }

    fn build_node(&mut self, boxes: &[Aabb<T>], centers: &[Vec3<T>], mut ids: Vec<usize>) -> usize {
        let bounds = ids.iter().skip(1).fold(boxes[ids[0]], |acc, &i| acc.union(&boxes[i]));
        let slot = self.nodes.len();
        if ids.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, faces: ids });
            return slot;
        }
        self.nodes.push(Node::Leaf { bounds, faces: Vec::new() });
        let axis = (0..3)
            .max_by(|&a, &b| {
                let span = |k: usize| {
                    let (lo, hi) = ids
                        .iter()
                        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| (lo.min(centers[i][k]), hi.max(centers[i][k])));
                    hi - lo
                };
                span(a).partial_cmp(&span(b)).expect("finite")
            })
            .expect("three axes");
        ids.sort_by(|&a, &b| centers[a][axis].partial_cmp(&centers[b][axis]).expect("finite").then(a.cmp(&b)));
        let right = ids.split_off(ids.len() / 2);
        let l = self.build_node(boxes, centers, ids);
        let r = self.build_node(boxes, centers, right);
        self.nodes[slot] = Node::Inner { bounds, children: [l, r] };
        slot
    }

    /// Visit every face whose box contains `x`.
    pub fn for_each_candidate(&self, x: Vec3<T>, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Leaf { bounds, faces } => {
                    if bounds.contains(x) {
                        faces.iter().for_each(|&f| visit(f));
                    }
                }
                Node::Inner { bounds, children } => {
                    if bounds.contains(x) {
                        stack.extend_from_slice(children);
                    }
                }
            }
        }
    }
}
