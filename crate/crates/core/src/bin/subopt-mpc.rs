fn main() {
    std::process::exit(subopt_mpc::cli::main_with_args(std::env::args_os()));
}
