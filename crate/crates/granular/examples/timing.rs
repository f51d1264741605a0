//! Table-build and evaluation timings across grid resolutions.
//!
//! One fast evaluation costs O(N_rho * M * N^d log N) against the direct
//! method's O(N^2d), so doubling N should grow the fast path by roughly
//! 2^(d+1) and the direct path by 2^2d. This example times both on a
//! ladder of 2-D grids plus one 3-D grid and prints the ratios.
//!
//! Takes a couple of minutes; build with --release for honest numbers.

use std::time::Instant;

use granular::collision::{
    eval_direct, eval_fast, precompute_direct, precompute_gain, precompute_loss,
    CollisionQuadrature, FastWorkspace, DEFAULT_MEMORY_BUDGET,
};
use granular::fft::MultiFft;
use granular::grid::GridSpec;
use granular::physics::{build_initial, InitialCondition, KernelSpec, RestitutionModel};

struct Row {
    label: String,
    fast_build: f64,
    fast_eval: f64,
    direct_eval: Option<f64>,
}

fn time_case(dim: usize, n: usize, with_direct: bool) -> granular::Result<Row> {
    let grid = GridSpec::new(dim, n, 10.0)?;
    let kernel = if dim == 3 {
        KernelSpec::hard_spheres_3d()
    } else {
        KernelSpec::maxwell_2d()
    };
    let restitution = RestitutionModel::Constant { e: 0.8 };
    let m_angular = if dim == 3 { 32 } else { 16 };
    let quadrature = CollisionQuadrature::new(grid, n, m_angular)?;

    let ic = if dim == 3 {
        InitialCondition::Maxwellian3D {
            rho0: 1.0,
            u0: [0.0, 0.0, 0.0],
            t0: 8.0,
        }
    } else {
        InitialCondition::Maxwellian2D {
            rho0: 1.0,
            u0: [0.0, 0.0],
            t0: 8.0,
        }
    };
    let mut field = build_initial(&ic, grid)?;
    let mut fft = MultiFft::new(dim, n);
    let coeffs = field.coeffs(&mut fft).to_vec();

    let start = Instant::now();
    let gain = precompute_gain(grid, &kernel, &restitution, &quadrature, DEFAULT_MEMORY_BUDGET)?;
    let loss = precompute_loss(grid, &kernel, &quadrature);
    let fast_build = start.elapsed().as_secs_f64();

    let mut workspace = FastWorkspace::new(grid);
    // Median of five evaluations.
    let mut samples = Vec::new();
    for _ in 0..5 {
        let start = Instant::now();
        let q = eval_fast(&gain, &loss, &coeffs, None, &mut workspace)?;
        samples.push(start.elapsed().as_secs_f64());
        std::hint::black_box(q);
    }
    samples.sort_by(f64::total_cmp);
    let fast_eval = samples[2];

    let direct_eval = if with_direct {
        let weights =
            precompute_direct(grid, &kernel, &restitution, &quadrature, DEFAULT_MEMORY_BUDGET)?;
        let start = Instant::now();
        let q = eval_direct(&weights, &coeffs, None)?;
        std::hint::black_box(q);
        Some(start.elapsed().as_secs_f64())
    } else {
        None
    };

    Ok(Row {
        label: format!("{dim}-D N={n}"),
        fast_build,
        fast_eval,
        direct_eval,
    })
}

fn main() -> granular::Result<()> {
    let cases = [(2, 16, true), (2, 32, true), (2, 64, false), (3, 16, false)];
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "case", "fast build", "fast eval", "direct eval"
    );
    let mut prev: Option<f64> = None;
    for (dim, n, with_direct) in cases {
        let row = time_case(dim, n, with_direct)?;
        let direct = row
            .direct_eval
            .map(|s| format!("{:>12.4}", s))
            .unwrap_or_else(|| format!("{:>12}", "-"));
        println!(
            "{:>10} {:>12.4} {:>12.4} {direct}",
            row.label, row.fast_build, row.fast_eval
        );
        if dim == 2 {
            if let Some(p) = prev {
                println!("{:>10}   eval ratio vs previous: {:.1}x", "", row.fast_eval / p);
            }
            prev = Some(row.fast_eval);
        }
    }
    Ok(())
}
