"""Code format plugged into the engine's coder when a bridge does the
scoring: the generated artifact is a Python bot module, passed through
verbatim. The bridge is the authority on script validity; a script it
rejects comes back through the evaluate contract as a zero-win report,
the same shape the engine gives any invalid program."""

from __future__ import annotations

from microcurr.coder import CodeFormat

from .protocol import FORMAT_ID

SCRIPT_FORMAT_INSTRUCTIONS = f"""A complete Python module for the python-sc2 bot API:
  define `class CombatBot(BotAI)` with `async def on_step(self, iteration)`;
  read the battlefield from self.units / self.enemy_units and issue unit
  orders (attack, move, ability casts) every step;
  top-level code runs once at load and must not block or raise.
Use the fence tag `{FORMAT_ID}`."""

# what the engine's opening attack-move policy looks like in this format
STARTER_SCRIPT = '''\
from sc2.bot_ai import BotAI


class CombatBot(BotAI):
    """Opening policy: every unit attack-moves at the closest enemy."""

    async def on_step(self, iteration: int):
        for unit in self.units:
            if self.enemy_units:
                unit.attack(self.enemy_units.closest_to(unit.position))
'''


def script_format() -> CodeFormat:
    def compile_script(text: str) -> tuple[str, str]:
        return text, text

    def render_script(artifact) -> str:
        if isinstance(artifact, str):
            return artifact
        # the engine seeds the loop with its own baseline tree object
        return STARTER_SCRIPT

    return CodeFormat(
        fence_tag=FORMAT_ID,
        format_instructions=SCRIPT_FORMAT_INSTRUCTIONS,
        compile=compile_script,
        render=render_script,
    )
