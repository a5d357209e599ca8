# Configuration package initialization 