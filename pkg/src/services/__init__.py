"""Manufactured solutions, convergence studies and property checks"""
