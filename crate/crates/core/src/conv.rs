//! Valid-mode strided 1-D convolution and its adjoints.
//!
//! All routines use true convolution (kernel time-reversed):
//! `out[t] = sum_j input[t * stride + j] * kernel[len - 1 - j]`.
//! Summation order inside each output is fixed, so results are
//! reproducible bit-for-bit.

/// Number of valid output frames, or `None` when the input is shorter than
/// the kernel.
pub fn output_len(input_len: usize, kernel_len: usize, stride: usize) -> Option<usize> {
    if kernel_len == 0 || stride == 0 || input_len < kernel_len {
        return None;
    }
    Some((input_len - kernel_len) / stride + 1)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Writes the valid strided convolution of `input` with `kernel` into `out`.
///
/// `out.len()` must equal [`output_len`].
pub fn convolve_valid(input: &[f64], kernel: &[f64], stride: usize, out: &mut [f64]) {
    let len = kernel.len();
    debug_assert_eq!(Some(out.len()), output_len(input.len(), len, stride));
    let flipped: Vec<f64> = kernel.iter().rev().copied().collect();
    for (t, o) in out.iter_mut().enumerate() {
        let start = t * stride;
        *o = dot(&input[start..start + len], &flipped);
    }
}

/// Accumulates the gradient with respect to the kernel given the gradient
/// of the convolution output.
pub fn accumulate_kernel_grad(input: &[f64], grad_out: &[f64], stride: usize, grad_kernel: &mut [f64]) {
    let len = grad_kernel.len();
    // d out[t] / d kernel[len-1-j] = input[t*stride + j]
    let mut flipped = vec![0.0; len];
    for (t, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let seg = &input[t * stride..t * stride + len];
        for (f, &x) in flipped.iter_mut().zip(seg) {
            *f += g * x;
        }
    }
    for (j, f) in flipped.into_iter().enumerate() {
        grad_kernel[len - 1 - j] += f;
    }
}

/// Accumulates the gradient with respect to the input given the gradient of
/// the convolution output.
pub fn accumulate_input_grad(kernel: &[f64], grad_out: &[f64], stride: usize, grad_input: &mut [f64]) {
    let len = kernel.len();
    let flipped: Vec<f64> = kernel.iter().rev().copied().collect();
    for (t, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let seg = &mut grad_input[t * stride..t * stride + len];
        for (gi, &h) in seg.iter_mut().zip(&flipped) {
            *gi += g * h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_len_formula() {
        assert_eq!(output_len(80_000, 256, 10), Some(7975));
        assert_eq!(output_len(7975, 128, 160), Some(50));
        assert_eq!(output_len(10, 10, 3), Some(1));
        assert_eq!(output_len(9, 10, 1), None);
    }

    #[test]
    fn convolution_flips_kernel() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let k = [1.0, 0.0];
        let mut out = [0.0; 3];
        convolve_valid(&x, &k, 1, &mut out);
        // kernel[0] multiplies the later sample
        assert_eq!(out, [2.0, 3.0, 4.0]);
    }

    #[test]
    fn adjoints_match_brute_force() {
        let x: Vec<f64> = (0..23).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let k = [0.5, -1.0, 2.0, 0.25, 1.5];
        let stride = 3;
        let n = output_len(x.len(), k.len(), stride).unwrap();
        let g: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();

        let mut gk = vec![0.0; k.len()];
        accumulate_kernel_grad(&x, &g, stride, &mut gk);
        let mut gx = vec![0.0; x.len()];
        accumulate_input_grad(&k, &g, stride, &mut gx);

        // <g, conv(x, k)> is bilinear; compare against perturbation by unit vectors.
        let objective = |x: &[f64], k: &[f64]| {
            let mut out = vec![0.0; n];
            convolve_valid(x, k, stride, &mut out);
            out.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        for j in 0..k.len() {
            let mut e = vec![0.0; k.len()];
            e[j] = 1.0;
            assert!((objective(&x, &e) - gk[j]).abs() < 1e-12);
        }
        for i in 0..x.len() {
            let mut e = vec![0.0; x.len()];
            e[i] = 1.0;
            assert!((objective(&e, &k) - gx[i]).abs() < 1e-12);
        }
    }
}
