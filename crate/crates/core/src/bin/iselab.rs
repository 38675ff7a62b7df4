fn main() {
    std::process::exit(iselab::cli::dispatch(std::env::args_os()));
}
