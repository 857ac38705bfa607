"""
This package contains all the test modules for the SAC Stealing-Detection Lab.
Tests cover the numerical core, data generation, attacks, fingerprints, evaluation, storage and the commands.
"""
