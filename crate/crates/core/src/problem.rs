//! A metric family on a grid, reduced and ready to assemble.

use crate::error::{Error, Result};
use crate::evolution::Generator;
use crate::geometry::{conformal_reduce, shift_flow_reduce, GridSpec, MetricFamily, TimeEnd};
use crate::linalg::{CMat, Gram};
use crate::operator_assembly::{assemble_h_asymptotic_with, assemble_h_with, gram_nu0, spectral_derivative, DiscreteOperator};
use crate::spin_algebra::{clifford, CliffordRep};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Problem {
    pub rep: CliffordRep,
    /// the family as supplied
    pub physical: MetricFamily,
    /// after the shift flow (lapse still present)
    pub flowed: MetricFamily,
    /// unit lapse, zero shift
    pub reduced: MetricFamily,
    pub grid: GridSpec,
    pub gram: Arc<Gram>,
    deriv: CMat,
}

impl Problem {
    pub fn new(family: MetricFamily, grid: GridSpec) -> Result<Self> {
        Self::with_rep(clifford(), family, grid)
    }

    pub fn with_rep(rep: CliffordRep, family: MetricFamily, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let flowed = shift_flow_reduce(&family)?;
        let reduced = conformal_reduce(&flowed)?;
        let gram = Arc::new(gram_nu0(&rep, &reduced, &grid)?);
        let deriv = spectral_derivative(&grid);
        let p = Problem { rep, physical: family, flowed, reduced, grid, gram, deriv };
        // fail early on bandwidth or circumference mismatches
        p.hamiltonian(0.0)?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        2 * self.grid.points
    }

    pub fn is_static(&self) -> bool {
        self.reduced.is_static()
    }

    pub fn hamiltonian(&self, t: f64) -> Result<DiscreteOperator> {
        Ok(DiscreteOperator::new(assemble_h_with(&self.rep, &self.reduced, &self.grid, &self.deriv, t)?, self.gram.clone()))
    }

    pub fn asymptotic(&self, end: TimeEnd) -> Result<DiscreteOperator> {
        Ok(DiscreteOperator::new(
            assemble_h_asymptotic_with(&self.rep, &self.reduced, &self.grid, &self.deriv, end)?,
            self.gram.clone(),
        ))
    }

    /// Lapse of the flowed family at the nodes.
    pub fn lapse(&self, t: f64) -> Result<Vec<f64>> {
        let c = self.flowed.lapse.sample(t, &self.grid.nodes())?;
        if c.value.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::family(&self.physical.name, format!("lapse not positive at t = {t}")));
        }
        Ok(c.value)
    }
}

impl Generator for Problem {
    fn matrix(&self, t: f64) -> Result<CMat> {
        assemble_h_with(&self.rep, &self.reduced, &self.grid, &self.deriv, t)
    }

    fn gram(&self) -> &Arc<Gram> {
        &self.gram
    }

    fn is_static(&self) -> bool {
        self.reduced.is_static()
    }
}
