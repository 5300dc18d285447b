"""
Interaction Signatures Package
"""
