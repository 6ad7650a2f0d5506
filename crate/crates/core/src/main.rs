fn main() {
    std::process::exit(softtouch::cli::dispatch(std::env::args_os()));
}
