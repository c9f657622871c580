use crate::depth_io::DepthFrame;

/// Per-pixel unit surface normals as three planar channels. Invalid pixels
/// hold `(0, 0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalField {
    pub width: usize,
    pub height: usize,
    pub nx: Vec<f64>,
    pub ny: Vec<f64>,
    pub nz: Vec<f64>,
}

impl NormalField {
    pub fn normal(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.nx[i], self.ny[i], self.nz[i]]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.normal(x, y) != [0.0; 3]
    }

    /// Zero every pixel where `keep` is false.
    pub fn mask(&mut self, keep: &[bool]) {
        for (i, &k) in keep.iter().enumerate() {
            if !k {
                self.nx[i] = 0.0;
                self.ny[i] = 0.0;
                self.nz[i] = 0.0;
            }
        }
    }

    /// `nx`, `ny`, `nz` planes back to back.
    pub fn into_planar(self) -> Vec<f64> {
        let mut out = self.nx;
        out.extend(self.ny);
        out.extend(self.nz);
        out
    }
}

/// Normals `(-dz/dx, -dz/dy, 1) / |.|` from central differences, one-sided
/// at the border. A pixel is invalid if it or any 4-neighbour reads 0.
pub fn compute_normals(frame: &DepthFrame) -> NormalField {
    let (w, h) = (frame.width(), frame.height());
    let z = |x: usize, y: usize| f64::from(frame.get(x, y));
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut nz = vec![0.0; w * h];

    for y in 0..h {
        for x in 0..w {
            let hole = frame.get(x, y) == 0
                || (x > 0 && frame.get(x - 1, y) == 0)
                || (x + 1 < w && frame.get(x + 1, y) == 0)
                || (y > 0 && frame.get(x, y - 1) == 0)
                || (y + 1 < h && frame.get(x, y + 1) == 0);
            if hole {
                continue;
            }
            let gx = if x == 0 {
                z(1, y) - z(0, y)
            } else if x == w - 1 {
                z(x, y) - z(x - 1, y)
            } else {
                (z(x + 1, y) - z(x - 1, y)) / 2.0
            };
            let gy = if y == 0 {
                z(x, 1) - z(x, 0)
            } else if y == h - 1 {
                z(x, y) - z(x, y - 1)
            } else {
                (z(x, y + 1) - z(x, y - 1)) / 2.0
            };
            let norm = (gx * gx + gy * gy + 1.0).sqrt();
            let i = y * w + x;
            nx[i] = -gx / norm;
            ny[i] = -gy / norm;
            nz[i] = 1.0 / norm;
        }
    }
    NormalField {
        width: w,
        height: h,
        nx,
        ny,
        nz,
    }
}
