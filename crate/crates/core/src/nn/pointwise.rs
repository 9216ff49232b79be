use ndarray::{Array3, Axis, Zip};

pub fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu_backward(x: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
    Zip::from(x).and(dy).map_collect(|&x, &d| if x > 0.0 { d } else { 0.0 })
}

pub fn leaky_relu(x: &Array3<f64>, slope: f64) -> Array3<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(x: &Array3<f64>, dy: &Array3<f64>, slope: f64) -> Array3<f64> {
    Zip::from(x).and(dy).map_collect(|&x, &d| if x > 0.0 { d } else { slope * d })
}

/// `(channels, batch, frames)` to `(channels, batch, 1)`.
pub fn mean_over_time(x: &Array3<f64>) -> Array3<f64> {
    x.mean_axis(Axis(2)).expect("frames > 0").insert_axis(Axis(2))
}

pub fn mean_over_time_backward(dy: &Array3<f64>, frames: usize) -> Array3<f64> {
    let (c, b, _) = dy.dim();
    let scaled = dy / frames as f64;
    scaled.broadcast((c, b, frames)).expect("singleton time axis").to_owned()
}
