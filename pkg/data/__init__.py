"""Data Layer: solveurs numériques, chargement des scènes et formats de fichiers"""
