//! CSV writers. Each file opens with the producing config as `#` lines.

use std::io::{self, Write};

use crate::automata::EnsembleSummary;
use crate::config::ExperimentConfig;
use crate::dynamics::Trajectory;
use crate::game::Automaton;

/// Rounds to 9 significant digits and prints the shortest decimal that reads
/// back as the rounded value; very small or large magnitudes use an exponent.
pub fn fmt(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 || (1e-5..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_header(out: &mut impl Write, cfg: &ExperimentConfig) -> io::Result<()> {
    for line in cfg.to_text().lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// `t,p1,p2,p3,p4,c`, one row per recorded sample.
pub fn write_trajectory(out: &mut impl Write, cfg: &ExperimentConfig, traj: &Trajectory) -> io::Result<()> {
    write_header(out, cfg)?;
    writeln!(out, "t,p1,p2,p3,p4,c")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let p = s.as_array();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(*t),
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(p[3]),
            fmt(s.clustering())
        )?;
    }
    Ok(())
}

/// Component pair plotted in a phase portrait.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePair {
    Actions,
    Groups,
}

impl PhasePair {
    pub fn components(self) -> (Automaton, Automaton) {
        match self {
            PhasePair::Actions => (Automaton::Action1, Automaton::Action2),
            PhasePair::Groups => (Automaton::Group1, Automaton::Group2),
        }
    }
}

pub fn write_phase(
    out: &mut impl Write,
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    pair: PhasePair,
) -> io::Result<()> {
    let (a, b) = pair.components();
    write_header(out, cfg)?;
    writeln!(out, "x,y")?;
    for s in &traj.states {
        writeln!(out, "{},{}", fmt(s.get(a)), fmt(s.get(b)))?;
    }
    Ok(())
}

/// Ensemble mean and population variance per component, plus mean `c`.
pub fn write_ensemble(out: &mut impl Write, cfg: &ExperimentConfig, summary: &EnsembleSummary) -> io::Result<()> {
    write_header(out, cfg)?;
    writeln!(out, "t,p1,p2,p3,p4,c,var_p1,var_p2,var_p3,var_p4")?;
    for ((t, m), (v, c)) in summary
        .times
        .iter()
        .zip(&summary.mean)
        .zip(summary.variance.iter().zip(&summary.mean_clustering))
    {
        let cells: Vec<String> = std::iter::once(*t)
            .chain(m.iter().copied())
            .chain(std::iter::once(*c))
            .chain(v.iter().copied())
            .map(fmt)
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// One line of the predicted-versus-reference delay table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub game: u32,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub c_star: f64,
    /// `None` when the equilibrium is stable for every delay.
    pub tau_p: Option<f64>,
    pub reference_tau_p: f64,
    /// Observed onset and its reference value, when measured.
    pub observed: Option<(f64, f64)>,
}

impl TableRow {
    pub fn rel_err(&self) -> Option<f64> {
        self.tau_p
            .map(|t| (t - self.reference_tau_p).abs() / self.reference_tau_p)
    }
}

pub fn write_table(out: &mut impl Write, rows: &[TableRow], observed: bool) -> io::Result<()> {
    write!(out, "game,alpha,beta,theta,c_star,tau_p,paper_tau_p,rel_err")?;
    if observed {
        write!(out, ",tau_o,paper_tau_o,rel_err_o")?;
    }
    writeln!(out)?;
    let opt = |x: Option<f64>| x.map_or_else(|| "inf".to_string(), fmt);
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.game,
            fmt(r.alpha),
            fmt(r.beta),
            fmt(r.theta),
            fmt(r.c_star),
            opt(r.tau_p),
            fmt(r.reference_tau_p),
            r.rel_err().map_or_else(String::new, fmt)
        )?;
        if observed {
            match r.observed {
                Some((tau_o, reference)) => write!(
                    out,
                    ",{},{},{}",
                    fmt(tau_o),
                    fmt(reference),
                    fmt((tau_o - reference).abs() / reference)
                )?,
                None => write!(out, ",,,")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::StateVector;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt(0.1), "0.1");
        assert_eq!(fmt(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt(2.0 / 3.0 * 1e5), "66666.6667");
        assert_eq!(fmt(0.0), "0");
        assert_eq!(fmt(123456789012.0), "123456789000");
        assert_eq!(fmt(f64::INFINITY), "inf");
        assert_eq!(fmt(9.817144661e-13), "9.81714466e-13");
        assert_eq!(fmt(-2.5e20), "-2.5e20");
        assert_eq!(fmt(1e-5), "0.00001");
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let cfg = ExperimentConfig::default();
        let traj = Trajectory::new(
            vec![0.0, 1.0],
            vec![StateVector::uniform(), StateVector::new(1.0, 0.0, 0.5, 0.2).unwrap()],
        );
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &cfg, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["t,p1,p2,p3,p4,c", "0,0.5,0.5,0.5,0.5,0.25", "1,1,0,0.5,0.2,0.1"]);
        assert_eq!(ExperimentConfig::from_csv_header(&text).unwrap(), cfg);
    }

    #[test]
    fn phase_pairs() {
        let cfg = ExperimentConfig::default();
        let traj = Trajectory::new(vec![0.0], vec![StateVector::new(0.1, 0.2, 0.3, 0.4).unwrap()]);
        for (pair, row) in [(PhasePair::Actions, "0.1,0.2"), (PhasePair::Groups, "0.3,0.4")] {
            let mut buf = Vec::new();
            write_phase(&mut buf, &cfg, &traj, pair).unwrap();
            let text = String::from_utf8(buf).unwrap();
            assert!(text.ends_with(&format!("x,y\n{row}\n")));
        }
    }

    #[test]
    fn table_columns() {
        let row = TableRow {
            game: 2,
            alpha: 0.02,
            beta: 0.4,
            theta: 0.1,
            c_star: 0.25,
            tau_p: Some(150.0),
            reference_tau_p: 148.0,
            observed: Some((140.0, 145.0)),
        };
        let mut buf = Vec::new();
        write_table(&mut buf, std::slice::from_ref(&row), true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "game,alpha,beta,theta,c_star,tau_p,paper_tau_p,rel_err,tau_o,paper_tau_o,rel_err_o");
        assert_eq!(lines[1], "2,0.02,0.4,0.1,0.25,150,148,0.0135135135,140,145,0.0344827586");
        let mut buf = Vec::new();
        write_table(&mut buf, &[], false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "game,alpha,beta,theta,c_star,tau_p,paper_tau_p,rel_err\n");
    }
}
