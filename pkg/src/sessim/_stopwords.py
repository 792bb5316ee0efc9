"""Bundled English stopword list (~300 function words), overridable by file."""

DEFAULT_STOPWORDS = frozenset("""
a about above across after afterwards again against all almost alone along
already also although always am among amongst an and another any anybody
anyhow anyone anything anyway anywhere are around as at away

back be became because become becomes becoming been before beforehand behind
being below beside besides between beyond both but by

came can cannot could

did do does doing done down during

each either else elsewhere enough etc even ever every everybody everyone
everything everywhere

few for former formerly from further

get gets give go goes going gone got

had has have having he hence her here hereafter hereby herein hereupon hers
herself him himself his how however

i if in indeed instead into is it its itself

just

keep kept

last latter latterly least less let like likely

made make many may maybe me meanwhile might mine more moreover most mostly
much must my myself

namely near neither never nevertheless next no nobody none noone nor not
nothing now nowhere

of off often on once one only onto or other others otherwise our ours
ourselves out over own

per perhaps please put

quite

rather really

said same say says see seem seemed seeming seems several shall she should
since so some somebody somehow someone something sometime sometimes somewhat
somewhere still such

take than that the their theirs them themselves then thence there thereafter
thereby therefore therein thereupon these they thing things this those though
through throughout thru thus to together too toward towards

under until unto up upon us use used uses using usually

various very via

was we well were what whatever when whence whenever where whereafter whereas
whereby wherein whereupon wherever whether which while whither who whoever
whole whom whose why will with within without would

yet you your yours yourself yourselves
""".split())
