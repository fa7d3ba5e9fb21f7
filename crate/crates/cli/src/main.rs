fn main() {
    std::process::exit(ssf_lab::main_with_args(std::env::args_os()));
}
