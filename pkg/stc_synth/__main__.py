# stc_synth/__main__.py
# Uso: python -m stc_synth <subcomando> [opciones]

from stc_synth.app import cli

if __name__ == "__main__":
    cli()
