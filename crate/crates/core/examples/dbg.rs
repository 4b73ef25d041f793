use speccurve::pipeline::{run_curve, PipelineConfig};
use speccurve::smooth::sg_smooth;
use speccurve::synth;

fn main() {
    let suite = synth::fidelity_suite(31_415, 6);
    let sample = suite.iter().find(|s| s.index == 1).unwrap();
    let spec = &sample.spec;
    println!("type={} n={} noise={:.4}", spec.spectrum_type, spec.n_points, spec.noise_sigma);
    for p in &spec.peaks {
        println!("peak c={:.4} h={:.4} w={:.4}", p.center, p.height, p.width);
    }
    let cfg = PipelineConfig::default();
    let out = run_curve(&sample.curves[0], Some(spec.spectrum_type), &cfg).unwrap();
    println!("eps={:.5} kept={} R={:.4}", out.sample.epsilon_used, out.sample.n_out, out.sample.reduction_ratio);
    let smoothed = sg_smooth(&sample.curves[0], cfg.sg).unwrap();
    let near: Vec<usize> = out.sample.indices.iter().copied().filter(|&i| (1820..1920).contains(&i)).collect();
    println!("sampled indices near 1870: {near:?}");
    for i in (1850..=1890).step_by(4) {
        println!("  y[{i}] = {:.4} (smoothed {:.4})", sample.curves[0].points[i].y, smoothed.points[i].y);
    }
}
