//! Operators and solvers shared by everything that runs on one dG space.

use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::forms::{assemble_mass, assemble_sip, DiscreteLaplacian, PenaltyConfig};
use crate::multigrid::{Multigrid, SpaceHierarchy};
use crate::solver::{conjugate_gradient, KrylovSettings, SolveInfo};
use crate::space::DgSpace;
use crate::sparse::{dot, SparseOperator};

pub struct Discretization {
    space: Arc<DgSpace>,
    penalty: PenaltyConfig,
    hierarchy: Arc<SpaceHierarchy>,
    mass: Arc<SparseOperator>,
    stiffness: Arc<SparseOperator>,
    laplacian: DiscreteLaplacian,
    /// Multigrid for `S + M`.
    elliptic: Multigrid,
    /// Multigrid for `M / tau + S`, rebuilt when `tau` changes.
    parabolic: Mutex<Option<(f64, Arc<Multigrid>)>>,
    pub krylov: KrylovSettings,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("level", &self.space.mesh().level())
            .field("degree", &self.space.degree())
            .field("penalty", &self.penalty)
            .finish()
    }
}

fn shifted(a: &SparseOperator, m: &SparseOperator, mass_factor: f64) -> SparseOperator {
    SparseOperator::linear_combination(&[(1.0, a), (mass_factor, m)])
}

impl Discretization {
    pub fn new(space: Arc<DgSpace>, penalty: PenaltyConfig) -> Result<Discretization> {
        penalty.validate()?;
        let hierarchy = Arc::new(SpaceHierarchy::new(&space)?);
        let mass = Arc::new(assemble_mass(&space));
        let stiffness = Arc::new(assemble_sip(&space, penalty.eta));
        let laplacian = DiscreteLaplacian::new(mass.clone(), stiffness.clone())?;
        let eta = penalty.eta;
        let elliptic = Multigrid::new(hierarchy.clone(), Arc::new(shifted(&stiffness, &mass, 1.0)), move |s| {
            shifted(&assemble_sip(s, eta), &assemble_mass(s), 1.0)
        })?;
        Ok(Discretization {
            space,
            penalty,
            hierarchy,
            mass,
            stiffness,
            laplacian,
            elliptic,
            parabolic: Mutex::new(None),
            krylov: KrylovSettings::default(),
        })
    }

    pub fn space(&self) -> &Arc<DgSpace> {
        &self.space
    }

    pub fn penalty(&self) -> PenaltyConfig {
        self.penalty
    }

    pub fn mass(&self) -> &Arc<SparseOperator> {
        &self.mass
    }

    pub fn stiffness(&self) -> &Arc<SparseOperator> {
        &self.stiffness
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        &self.laplacian
    }

    /// V-cycle for `S + M`.
    pub fn elliptic_multigrid(&self) -> &Multigrid {
        &self.elliptic
    }

    /// V-cycle for `M / tau + S`.
    pub fn parabolic_multigrid(&self, tau: f64) -> Result<Arc<Multigrid>> {
        let mut cache = self.parabolic.lock().expect("multigrid cache poisoned");
        if let Some((t, mg)) = cache.as_ref() {
            if *t == tau {
                return Ok(mg.clone());
            }
        }
        let eta = self.penalty.eta;
        let finest = Arc::new(shifted(&self.stiffness, &self.mass, 1.0 / tau));
        let mg = Arc::new(Multigrid::new(self.hierarchy.clone(), finest, move |s| {
            shifted(&assemble_sip(s, eta), &assemble_mass(s), 1.0 / tau)
        })?);
        *cache = Some((tau, mg.clone()));
        Ok(mg)
    }

    /// Solves `(S + M) x = b` by multigrid-preconditioned CG.
    pub fn solve_elliptic(&self, b: &[f64], x: &mut [f64]) -> Result<SolveInfo> {
        let op = self.elliptic.operator();
        conjugate_gradient(|v, out| op.apply_into(v, out), |r, z| self.elliptic.apply(r, z), b, x, self.krylov)
    }

    /// Solves the singular system `S x = b` (b orthogonal to constants) by
    /// CG preconditioned with the `S + M` multigrid.
    pub fn solve_stiffness(&self, b: &[f64], x: &mut [f64]) -> Result<SolveInfo> {
        // Remove the roundoff component along the kernel so the system stays consistent.
        let kernel = self.space.constant_field(1.0).into_coeffs();
        let s = dot(b, &kernel) / dot(&kernel, &kernel);
        let b: Vec<f64> = b.iter().zip(&kernel).map(|(v, k)| v - s * k).collect();
        conjugate_gradient(
            |v, out| self.stiffness.apply_into(v, out),
            |r, z| self.elliptic.apply(r, z),
            &b,
            x,
            self.krylov,
        )
    }
}
