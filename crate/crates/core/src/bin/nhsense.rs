// SPDX-License-Identifier: Apache-2.0
fn main() {
    let out = nhsense::cli::run(std::env::args_os());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::process::exit(out.code);
}
