"""Discrete-event network simulation: topologies, adversaries, scenario runs."""
