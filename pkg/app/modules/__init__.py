# Ampere2D: módulos numéricos
