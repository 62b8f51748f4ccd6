//! End-to-end exercise of the C ABI from Rust: build a diffusivity, solve a
//! small heat problem, and read the fields back through the raw interface.

use std::ptr;

use pmesim_ffi::*;

fn gaussian(n: usize, half_width: f64, var: f64) -> Vec<f64> {
    let h = 2.0 * half_width / n as f64;
    (0..n)
        .map(|i| {
            let x = -half_width + (i as f64 + 0.5) * h;
            (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        })
        .collect()
}

#[test]
fn heat_solve_through_the_c_abi() {
    unsafe {
        let mut phi: *mut PmesimPhi = ptr::null_mut();
        assert_eq!(pmesim_phi_constant(1.0, &mut phi), PmesimStatus::Ok);

        let (n, l) = (128usize, 8.0);
        let u0 = gaussian(n, l, 0.25);
        let mut sol: *mut PmesimSolution = ptr::null_mut();
        assert_eq!(
            pmesim_solve(phi, l, n, u0.as_ptr(), 0.5, 32, &mut sol),
            PmesimStatus::Ok
        );
        assert_eq!(pmesim_solution_n_times(sol), 33);
        assert_eq!(pmesim_solution_grid_n(sol), n);

        let mut u = vec![0.0f64; n];
        let mut t = 0.0f64;
        assert_eq!(
            pmesim_solution_row(sol, PmesimField::U, 32, u.as_mut_ptr(), &mut t),
            PmesimStatus::Ok
        );
        assert!((t - 0.5).abs() < 1e-12);
        // mass is preserved and the profile spread out
        let h = 2.0 * l / n as f64;
        let mass: f64 = u.iter().sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        let sup0 = u0.iter().cloned().fold(0.0f64, f64::max);
        let sup = u.iter().cloned().fold(0.0f64, f64::max);
        assert!(sup < sup0);

        // eta = u for the heat graph
        let mut eta = vec![0.0f64; n];
        assert_eq!(
            pmesim_solution_row(sol, PmesimField::Eta, 32, eta.as_mut_ptr(), ptr::null_mut()),
            PmesimStatus::Ok
        );
        for (a, b) in u.iter().zip(&eta) {
            assert!((a - b).abs() < 1e-9);
        }
        // chi = 1 everywhere
        let mut chi = vec![0.0f64; n];
        assert_eq!(
            pmesim_solution_row(sol, PmesimField::Chi, 16, chi.as_mut_ptr(), ptr::null_mut()),
            PmesimStatus::Ok
        );
        for c in &chi {
            assert!((c - 1.0).abs() < 1e-12);
        }

        assert_eq!(
            pmesim_solution_row(sol, PmesimField::U, 33, u.as_mut_ptr(), ptr::null_mut()),
            PmesimStatus::IndexOutOfRange
        );

        pmesim_solution_free(sol);
        pmesim_phi_free(phi);
    }
}

#[test]
fn header_is_generated() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("pmesim.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header exists");
    for symbol in [
        "pmesim_phi_constant",
        "pmesim_phi_heaviside",
        "pmesim_solve",
        "pmesim_solution_row",
        "pmesim_last_error",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
