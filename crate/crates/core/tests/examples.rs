macro_rules! example_test {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect("example should run");
        }
    };
}

example_test!(condense_and_dare, "condense_and_dare.rs");
example_test!(qp_solve, "qp_solve.rs");
example_test!(admm_fixed_point, "admm_fixed_point.rs");
example_test!(rate_lmi, "rate_lmi.rs");
example_test!(certificate_chain, "certificate_chain.rs");
example_test!(closed_loop, "closed_loop.rs");
example_test!(ell_sweep, "ell_sweep.rs");
