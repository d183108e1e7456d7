/// Axis-aligned instance box (the unrotated geometry box).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        let inter = ix.max(0.0) * iy.max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// One-to-one matching: repeatedly take the highest-IoU pair whose members
/// are both still free. Ties break by prediction index, then reference index.
/// Zero-overlap pairs are still matched once nothing better remains, so
/// `min(|pred|, |ref|)` pairs are always returned.
pub fn greedy_match(pred: &[BBox], reference: &[BBox]) -> Vec<(usize, usize)> {
    let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(pred.len() * reference.len());
    for (i, p) in pred.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            cands.push((p.iou(r), i, j));
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut pu, mut ru) = (vec![false; pred.len()], vec![false; reference.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if !pu[i] && !ru[j] {
            pu[i] = true;
            ru[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}
