# stc_synth/app.py

import click

from stc_synth import __version__
from stc_synth.modules.abstraccion.abstraccion_commands import abstract_command
from stc_synth.modules.juegos.juegos_commands import solve_command
from stc_synth.modules.simulacion.simulacion_commands import plot_command, simulate_command
from stc_synth.modules.sintesis.sintesis_commands import calibrate_command, pipeline_command


def create_cli() -> click.Group:
    """
    Crea el grupo de comandos stc-synth.

    Cada etapa del flujo se registra como un subcomando independiente para poder
    ejecutarla por separado desde scripts o pruebas.
    """
    @click.group("stc-synth")
    @click.version_option(__version__, prog_name="stc-synth")
    def cli():
        """Síntesis de estrategias de muestreo auto-disparado sobre un PETC de referencia."""

    # Etapas individuales.
    cli.add_command(abstract_command)
    cli.add_command(solve_command)
    cli.add_command(simulate_command)
    cli.add_command(plot_command)

    # Flujos completos.
    cli.add_command(pipeline_command)
    cli.add_command(calibrate_command)

    return cli


cli = create_cli()
