//! gnuplot scripts for the CSV outputs.

const PREAMBLE: &str = "set datafile separator ','\nset datafile commentschars '#'\nset grid\n";

pub fn spectrum(file: &str, xlabel: &str, ylabel: &str) -> String {
    format!("{PREAMBLE}set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot '{file}' every ::1 using 1:2 with lines notitle\n")
}

pub fn transitions() -> String {
    format!(
        "{PREAMBLE}set xlabel 'frequency (MHz)'\nset ylabel '|<i|Ix|j>|^2'\nset logscale y\n\
         plot 'transitions.csv' every ::1 using 6:($7 > 0 ? $7 : 1/0) with impulses notitle\n"
    )
}

pub fn rabi_map(file: &str, columns: usize) -> String {
    format!(
        "{PREAMBLE}set xlabel 'RF pulse length (s)'\nset ylabel 'Davies contrast'\n\
         plot for [c=2:{}] '{file}' every ::1 using 1:c with lines title sprintf('amplitude %d', c - 1)\n",
        columns + 1
    )
}

pub fn s21(file: &str) -> String {
    format!("{PREAMBLE}set xlabel 'frequency (Hz)'\nset ylabel 'S21 (dB)'\nplot '{file}' every ::1 using 1:2 with lines notitle\n")
}
