"""Reeb chords between Lagrangian planes, their families and Floer-type flows.

This package provides:
- Hamiltonian families with boundary planes and the contact check (phase)
- Adaptive Runge-Kutta flows with variational equations (flow)
- Newton shooting for chords and their nondegeneracy (chords)
- The discrete Rabinowitz action and its estimates (rabinowitz)
- Pseudo-arclength continuation, fold location and limit probes (continuation)
- Gradient flows of time-dependent action functionals (gradient)
- Atlas persistence and plot bundles (store)
"""
