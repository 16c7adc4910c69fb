use super::{Mask, MaskError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// One 1-D pass over `len` cells at `stride`: a window of `2r+1` centred on
/// each cell, clipped at the ends. Dilation keeps cells whose window holds
/// any foreground; erosion keeps cells whose full, unclipped window is
/// foreground (outside the image counts as background).
fn pass(src: &[bool], dst: &mut [bool], len: usize, stride: usize, offset: usize, r: usize, op: MorphOp, prefix: &mut Vec<usize>) {
    prefix.clear();
    prefix.push(0);
    for i in 0..len {
        let v = usize::from(src[offset + i * stride]);
        prefix.push(prefix[i] + v);
    }
    let full = 2 * r + 1;
    for i in 0..len {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(len);
        let count = prefix[hi] - prefix[lo];
        dst[offset + i * stride] = match op {
            MorphOp::Dilate => count > 0,
            MorphOp::Erode => count == full,
        };
    }
}

/// Binary dilation or erosion with a `(2r+1)²` box structuring element.
pub fn morph(mask: &Mask, op: MorphOp, radius: usize) -> Result<Mask> {
    if radius < 1 {
        return Err(MaskError::InvalidRadius);
    }
    let (w, h) = (mask.width(), mask.height());
    let src: Vec<bool> = mask.labels().iter().map(|&v| v != 0).collect();
    let mut rows = vec![false; w * h];
    let mut out = vec![false; w * h];
    let mut prefix = Vec::with_capacity(w.max(h) + 1);
    for y in 0..h {
        pass(&src, &mut rows, w, 1, y * w, radius, op, &mut prefix);
    }
    for x in 0..w {
        pass(&rows, &mut out, h, w, x, radius, op, &mut prefix);
    }
    Mask::new(w, h, out.into_iter().map(u8::from).collect())
}

/// `dilate(mask, r) AND NOT erode(mask, r)`.
pub fn boundary_ring(mask: &Mask, radius: usize) -> Result<Mask> {
    let outer = morph(mask, MorphOp::Dilate, radius)?;
    let inner = morph(mask, MorphOp::Erode, radius)?;
    outer.and_not(&inner)
}
