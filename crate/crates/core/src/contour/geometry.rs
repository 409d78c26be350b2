use crate::linalg::c64;

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub a: c64,
    pub b: c64,
}

impl Segment {
    pub fn new(a: c64, b: c64) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn split(&self) -> (Segment, Segment) {
        let m = 0.5 * (self.a + self.b);
        (Segment::new(self.a, m), Segment::new(m, self.b))
    }

    pub fn distance_to_point(&self, p: c64) -> f64 {
        let d = self.b - self.a;
        let len2 = d.norm_sqr();
        if len2 == 0.0 {
            return (p - self.a).norm();
        }
        let t = (((p - self.a) * d.conj()).re / len2).clamp(0.0, 1.0);
        (p - (self.a + d * t)).norm()
    }
}

fn cross(u: c64, v: c64) -> f64 {
    u.re * v.im - u.im * v.re
}

fn intersects(s: &Segment, t: &Segment) -> bool {
    let d1 = cross(t.b - t.a, s.a - t.a);
    let d2 = cross(t.b - t.a, s.b - t.a);
    let d3 = cross(s.b - s.a, t.a - s.a);
    let d4 = cross(s.b - s.a, t.b - s.a);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

pub fn segment_distance(s: &Segment, t: &Segment) -> f64 {
    if intersects(s, t) {
        return 0.0;
    }
    s.distance_to_point(t.a)
        .min(s.distance_to_point(t.b))
        .min(t.distance_to_point(s.a))
        .min(t.distance_to_point(s.b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let s = Segment::new(c64::new(0.0, 1.0), c64::new(2.0, 1.0));
        let t = Segment::new(c64::new(1.0, 0.0), c64::new(5.0, 0.0));
        assert!((segment_distance(&s, &t) - 1.0).abs() < 1e-15);
        let u = Segment::new(c64::new(1.0, -1.0), c64::new(1.0, 2.0));
        assert_eq!(segment_distance(&s, &u), 0.0);
        assert!((s.distance_to_point(c64::new(3.0, 1.0)) - 1.0).abs() < 1e-15);
    }
}
