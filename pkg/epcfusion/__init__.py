"""Gated multimodal fusion of EPC records, assessor text and building
footprints for SAP / EI prediction, attribution and retrofit scenarios."""

__version__ = '0.1.0'
