fn main() {
    std::process::exit(rkhs_invlab::cli::main(std::env::args_os()));
}
