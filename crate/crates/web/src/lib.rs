//! wasm-bindgen bindings for the browser demo in `www/`.

use channelfield::chains::detect_chain;
use channelfield::flow::{integrate_curve, SmoothedField};
use channelfield::markov::{log_grid, rate_table_csv};
use channelfield::mollify::MollifierSpec;
use channelfield::pointfield::{sample_configuration, IntensityParams, Sigma};
use channelfield::tessellation::{Phi, TessellationView};
use channelfield::Rect;
use wasm_bindgen::prelude::*;

fn js_err(e: channelfield::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One sampled configuration on `[0, width] × [0, height]`, padded by one unit
/// so the smoothed field is defined up to the edges.
#[wasm_bindgen]
pub struct Scene {
    view: TessellationView,
    width: f64,
    height: f64,
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, alpha: f64, width: f64, height: f64) -> Result<Scene, JsError> {
        let window = Rect::nondegenerate(-1.0, -1.0, width + 1.0, height + 1.0).map_err(js_err)?;
        let params = IntensityParams::new(alpha).map_err(js_err)?;
        let cfg = sample_configuration(&window, 1e-3, &params, seed).map_err(js_err)?;
        Ok(Scene { view: TessellationView::new(cfg), width, height })
    }

    #[wasm_bindgen(js_name = domainCount)]
    pub fn domain_count(&self) -> usize {
        self.view.len()
    }

    /// RGBA pixels, `px` per unit, rows from the top: horizontal winners in
    /// orange, vertical in blue, brighter when stronger; uncovered points grey.
    #[wasm_bindgen(js_name = renderField)]
    pub fn render_field(&self, px: u32) -> Vec<u8> {
        let (cols, rows) = ((self.width * px as f64) as usize, (self.height * px as f64) as usize);
        let mut out = Vec::with_capacity(cols * rows * 4);
        for r in 0..rows {
            let y = self.height - (r as f64 + 0.5) / px as f64;
            for c in 0..cols {
                let x = (c as f64 + 0.5) / px as f64;
                let rgb = match self.view.phi_at([x, y]) {
                    Ok(Phi::Point(k)) => {
                        let p = self.view.point(k);
                        let s = (0.35 + 0.15 * p.xi.ln()).min(1.0);
                        let shade = |v: f64| (255.0 * v) as u8;
                        match p.sigma {
                            Sigma::Horizontal => [shade(s), shade(0.55 * s), shade(0.15 * s)],
                            Sigma::Vertical => [shade(0.15 * s), shade(0.45 * s), shade(s)],
                        }
                    }
                    _ => [40, 40, 40],
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }

    /// Curve of the smoothed field from `(x, y)`, flattened as `x0, y0, x1, y1, …`
    /// and thinned to every `every`-th step.
    pub fn trace(&self, x: f64, y: f64, t_end: f64, step: f64, every: usize) -> Result<Vec<f64>, JsError> {
        let field = SmoothedField::new(&self.view, MollifierSpec::default());
        let curve = integrate_curve([x, y], t_end, step, &field).map_err(js_err)?;
        let every = every.max(1);
        let last = curve.positions.len() - 1;
        Ok(curve.positions.iter().enumerate().filter(|(i, _)| i % every == 0 || *i == last).flat_map(|(_, p)| [p[0], p[1]]).collect())
    }

    /// Chain record from `(x, y)` as JSON.
    pub fn chain(&self, x: f64, y: f64, n_max: usize) -> Result<String, JsError> {
        Ok(detect_chain([x, y], &self.view, n_max).map_err(js_err)?.to_json())
    }
}

/// Blocking rates on a logarithmic ζ grid, as CSV.
#[wasm_bindgen(js_name = rateTable)]
pub fn rate_table(alpha: f64, zeta_max: f64, points: usize) -> Result<String, JsError> {
    rate_table_csv(alpha, &log_grid(1.0, zeta_max, points.max(2))).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_renders_and_traces() {
        let s = Scene::new(3, 1.5, 10.0, 8.0).unwrap();
        assert!(s.domain_count() > 0);
        assert_eq!(s.render_field(4).len(), 40 * 32 * 4);
        let pts = s.trace(1.0, 1.0, 5.0, 0.01, 10).unwrap();
        assert_eq!(pts.len(), 2 * 51);
        let (a, b) = (&pts[..2], &pts[pts.len() - 2..]);
        assert!((b[0] + b[1] - a[0] - a[1] - 5.0).abs() < 1e-9);
        let rec = s.chain(0.5, 0.5, 8).unwrap();
        assert!(rec.contains("\"levels\"") && rec.contains("\"terminal_level\""));
    }

    #[test]
    fn rate_table_has_header_and_rows() {
        let csv = rate_table(1.5, 100.0, 5).unwrap();
        assert!(csv.starts_with("zeta,lambda0"));
        assert_eq!(csv.lines().count(), 6);
    }
}
