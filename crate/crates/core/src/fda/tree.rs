use super::FdaError;

/// One ball of the fractal decomposition, in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersphereNode {
    pub center: Vec<f64>,
    pub radius: f64,
    pub depth: usize,
    /// Objective value at the (clamped) center; `None` until evaluated.
    pub quality: Option<f64>,
}

impl HypersphereNode {
    /// The unit ball centered at the origin of the normalized cube.
    pub fn root(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            radius: 1.0,
            depth: 0,
            quality: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The center clamped into `[-1, 1]^D`, which is where the node is evaluated.
    pub fn clamped_center(&self) -> Vec<f64> {
        self.center.iter().map(|c| c.clamp(-1.0, 1.0)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = self
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| (c - v) * (c - v))
            .sum();
        d2 <= self.radius * self.radius
    }
}

/// Radius of every node at `depth` for the given inflation.
pub fn radius_at_depth(depth: usize, inflation: f64) -> f64 {
    (0..depth).fold(1.0, |r, _| r / 2.0 * inflation)
}

/// Splits `node` into `2·D` children placed at half radius along each axis,
/// ordered by dimension and `+` before `-`.
pub fn decompose(
    node: &HypersphereNode,
    inflation: f64,
    max_depth: usize,
) -> Result<Vec<HypersphereNode>, FdaError> {
    if node.depth >= max_depth {
        return Err(FdaError::MaxDepthReached(max_depth));
    }
    let offset = node.radius / 2.0;
    let radius = offset * inflation;
    let mut children = Vec::with_capacity(2 * node.dim());
    for d in 0..node.dim() {
        for sign in [1.0, -1.0] {
            let mut center = node.center.clone();
            center[d] += sign * offset;
            children.push(HypersphereNode {
                center,
                radius,
                depth: node.depth + 1,
                quality: None,
            });
        }
    }
    Ok(children)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_children() {
        let kids = decompose(&HypersphereNode::root(2), 1.0, 4).unwrap();
        let centers: Vec<_> = kids.iter().map(|k| k.center.clone()).collect();
        assert_eq!(
            centers,
            vec![
                vec![0.5, 0.0],
                vec![-0.5, 0.0],
                vec![0.0, 0.5],
                vec![0.0, -0.5]
            ]
        );
        assert!(kids.iter().all(|k| k.radius == 0.5 && k.depth == 1));
    }

    #[test]
    fn inflated_one_dimensional_children() {
        let kids = decompose(&HypersphereNode::root(1), 1.75, 4).unwrap();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].center, vec![0.5]);
        assert_eq!(kids[1].center, vec![-0.5]);
        assert!(kids.iter().all(|k| k.radius == 0.875));
    }

    #[test]
    fn three_dimensional_children_are_distinct() {
        let kids = decompose(&HypersphereNode::root(3), 1.75, 4).unwrap();
        assert_eq!(kids.len(), 6);
        for (i, a) in kids.iter().enumerate() {
            for b in &kids[i + 1..] {
                assert_ne!(a.center, b.center);
            }
        }
    }

    #[test]
    fn max_depth_is_enforced() {
        let mut n = HypersphereNode::root(2);
        n.depth = 4;
        assert_eq!(decompose(&n, 1.75, 4), Err(FdaError::MaxDepthReached(4)));
    }

    #[test]
    fn radius_shrinks_geometrically() {
        let mut node = HypersphereNode::root(2);
        for depth in 1..=4 {
            node = decompose(&node, 1.75, 4).unwrap().swap_remove(0);
            assert_eq!(node.radius, radius_at_depth(depth, 1.75));
        }
        assert!((radius_at_depth(4, 1.75) - 0.875f64.powi(4)).abs() < 1e-15);
    }
}
