fn main() {
    std::process::exit(label_noise_lab::cli_io::main_cli(std::env::args_os()));
}
