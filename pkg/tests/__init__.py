"""Test suite for the multi-domain imputation package."""
