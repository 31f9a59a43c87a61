//! The 127-ion reference crystal, built once per test binary.

#![allow(dead_code)]

use std::sync::OnceLock;

use ioncrystal::crystal::{relax, seed_hexagonal, CrystalState, Pseudopotential};
use ioncrystal::gate::{select_pair, BeamModulation, GateConfig, GateProblem, PairSelector};
use ioncrystal::micromotion::{self_consistent_positions, MicromotionExpansion};
use ioncrystal::modes::{
    mode_shift_report, time_averaged_coupling, transverse_mode_set, CouplingMatrices,
    ModeShiftReport, TransverseModeSet,
};
use ioncrystal::trap::{MathieuParams, TrapConfig, X, Y, Z};
use ioncrystal::units::{mhz_to_angular, UnitSystem};

pub struct Reference {
    pub units: UnitSystem<f64>,
    pub trap: TrapConfig<f64>,
    pub mathieu: MathieuParams<f64>,
    pub crystal: CrystalState<f64>,
    pub series: MicromotionExpansion<f64>,
    pub coupling: CouplingMatrices<f64>,
    pub static_modes: TransverseModeSet<f64>,
    pub modes: TransverseModeSet<f64>,
    pub shifts: ModeShiftReport<f64>,
}

impl Reference {
    pub fn omega_z(&self) -> f64 {
        self.mathieu.omega[Z]
    }

    /// Δk = 8 μm⁻¹, w = 3 μm, m = 13 segments, τ = 50·2π/ω_z, k_BT/h = 10 MHz.
    pub fn gate_config(&self, pair: PairSelector) -> GateConfig<f64> {
        let wz = self.omega_z();
        GateConfig {
            pair: select_pair(self.series.r0(), pair).unwrap(),
            dk: 8.0,
            waist: 3.0,
            detuning: wz,
            duration: 50.0 * std::f64::consts::TAU / wz,
            segments: 13,
            temperature: mhz_to_angular(10.0),
            phase_offset: 0.0,
        }
    }

    /// The micromotion problem and its static counterpart.
    pub fn gate_problems(&self, pair: PairSelector) -> (GateProblem<f64>, GateProblem<f64>) {
        let gc = self.gate_config(pair);
        let modulation = [
            BeamModulation::from_expansion(&self.series, gc.pair.0, gc.waist),
            BeamModulation::from_expansion(&self.series, gc.pair.1, gc.waist),
        ];
        let (rf, m) = (self.trap.rf_omega, self.trap.ion_mass);
        let dynamic = GateProblem::new(&self.modes, &gc, modulation, rf, m, &self.units).unwrap();
        let unit = [BeamModulation::unit(), BeamModulation::unit()];
        let fixed = GateProblem::new(&self.static_modes, &gc, unit, rf, m, &self.units).unwrap();
        (dynamic, fixed)
    }
}

pub fn reference() -> &'static Reference {
    static CELL: OnceLock<Reference> = OnceLock::new();
    CELL.get_or_init(|| {
        let units = UnitSystem::new();
        let trap = TrapConfig::reference();
        let mathieu = MathieuParams::from_config(&trap, &units).unwrap();
        let pot = Pseudopotential {
            omega_x: mathieu.omega[X],
            omega_y: mathieu.omega[Y],
            mass: trap.ion_mass,
            coulomb: units.coulomb,
        };
        let crystal = relax(&seed_hexagonal(trap.n_ions, 7.0).unwrap(), &pot).unwrap();
        let series =
            self_consistent_positions(&crystal.positions, &trap, &units, &Default::default())
                .unwrap();
        let coupling = time_averaged_coupling(&series).unwrap();
        let (static_modes, modes) =
            transverse_mode_set(&coupling, mathieu.omega[Z], trap.ion_mass, units.coulomb).unwrap();
        let shifts = mode_shift_report(&modes, &static_modes).unwrap();
        Reference {
            units,
            trap,
            mathieu,
            crystal,
            series,
            coupling,
            static_modes,
            modes,
            shifts,
        }
    })
}
