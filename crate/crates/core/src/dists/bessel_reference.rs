//! Frozen reference values for ln K_nu(x), precomputed externally at
//! 40-digit precision. Used only by tests.

#[allow(clippy::excessive_precision)]
pub(crate) const REFERENCE: [(f64, f64, f64); 180] = [
    (0.0, 1e-08, 2.91974781742244),
    (0.0, 0.0001, 2.2328353544537176),
    (0.0, 0.1, 0.8866843666787422),
    (0.0, 0.5, -0.07858976986908142),
    (0.0, 1.0, -0.8650643989067881),
    (0.0, 1.9, -2.049137547057892),
    (0.0, 2.0, -2.1724882049757097),
    (0.0, 2.1, -2.2947782370499974),
    (0.0, 2.5, -2.775030850603404),
    (0.0, 5.0, -5.601831213717063),
    (0.0, 10.0, -10.937432823038334),
    (0.0, 50.0, -51.73269565529093),
    (0.0, 100.0, -102.07803755445829),
    (0.0, 300.0, -302.6265158593044),
    (0.0, 700.0, -703.049927258944),
    (0.25, 1e-08, 5.373236722936956),
    (0.25, 0.0001, 3.061141471685979),
    (0.25, 0.1, 0.9877391515338619),
    (0.25, 0.5, -0.04049254365776939),
    (0.25, 1.0, -0.842251142802858),
    (0.25, 1.9, -2.035611747852941),
    (0.25, 2.0, -2.1595391849082106),
    (0.25, 2.1, -2.282357860420959),
    (0.25, 2.5, -2.7643482246177804),
    (0.25, 5.0, -5.596102912418134),
    (0.25, 10.0, -10.934449541935013),
    (0.25, 50.0, -51.7320767753011),
    (0.25, 100.0, -102.07772660045701),
    (0.25, 300.0, -302.62641186563127),
    (0.25, 700.0, -703.0498826479258),
    (0.3, 1e-08, 6.136784067906207),
    (0.3, 0.0001, 3.369890975180347),
    (0.3, 0.1, 1.0314236724695096),
    (0.3, 0.5, -0.023807027345432573),
    (0.3, 1.0, -0.8322344948675559),
    (0.3, 1.9, -2.029665766020718),
    (0.3, 2.0, -2.153846394283632),
    (0.3, 2.1, -2.2768971667749383),
    (0.3, 2.5, -2.759650711681682),
    (0.3, 5.0, -5.59358296703189),
    (0.3, 10.0, -10.933136977225418),
    (0.3, 50.0, -51.731804468883745),
    (0.3, 100.0, -102.07758978079657),
    (0.3, 300.0, -302.62636610841884),
    (0.3, 700.0, -703.0498630190781),
    (0.5, 1e-08, 9.43613171462091),
    (0.5, 0.0001, 4.830861538632819),
    (0.5, 0.1, 1.2770838991417501),
    (0.5, 0.5, 0.07236494292470008),
    (0.5, 1.0, -0.7742086473552726),
    (0.5, 1.9, -1.9951355904414698),
    (0.5, 2.0, -2.1207822376352454),
    (0.5, 2.1, -2.245177319719961),
    (0.5, 2.5, -2.7323540132923503),
    (0.5, 5.0, -5.578927603572323),
    (0.5, 10.0, -10.925501193852295),
    (0.5, 50.0, -51.73022015006934),
    (0.5, 100.0, -102.07679374034932),
    (0.5, 300.0, -302.62609988468336),
    (0.5, 700.0, -703.0497488148769),
    (1.0, 1e-08, 18.420680743952364),
    (1.0, 0.0001, 9.210340322844822),
    (1.0, 0.1, 2.287861712107168),
    (1.0, 0.5, 0.5046713973046512),
    (1.0, 1.0, -0.5076519482107523),
    (1.0, 1.9, -1.8347077662739777),
    (1.0, 2.0, -1.967071302560514),
    (1.0, 2.1, -2.0976347466777363),
    (1.0, 2.5, -2.6051667300933747),
    (1.0, 5.0, -5.510369296585223),
    (1.0, 10.0, -10.88973018058807),
    (1.0, 50.0, -51.72279387018363),
    (1.0, 100.0, -102.07306232835992),
    (1.0, 300.0, -302.6248519619662),
    (1.0, 700.0, -703.0492134827668),
    (1.5, 1e-08, 27.856812468573274),
    (1.5, 0.0001, 14.041301905609334),
    (1.5, 0.1, 3.674979171940121),
    (1.5, 0.5, 1.1709772315928098),
    (1.5, 1.0, -0.08106146679532726),
    (1.5, 1.9, -1.5722787396214362),
    (1.5, 2.0, -1.7153171295270808),
    (1.5, 2.1, -1.8557125529582381),
    (1.5, 2.5, -2.3958817766711373),
    (1.5, 5.0, -5.396606046778368),
    (1.5, 10.0, -10.830191014047971),
    (1.5, 50.0, -51.71041752277316),
    (1.5, 100.0, -102.06684340949614),
    (1.5, 300.0, -302.6227720945907),
    (1.5, 700.0, -703.0483212628858),
    (2.0, 1e-08, 37.534508668464674),
    (2.0, 0.0001, 19.113827922012312),
    (2.0, 0.1, 5.295834109025257),
    (2.0, 0.5, 2.021571874388047),
    (2.0, 1.0, 0.4854086715656462),
    (2.0, 1.9, -1.2143285798927685),
    (2.0, 2.0, -1.3713673077253719),
    (2.0, 2.1, -1.5247058238483957),
    (2.0, 2.5, -2.108168590189073),
    (2.0, 5.0, -5.238362387768046),
    (2.0, 10.0, -10.747001122069369),
    (2.0, 50.0, -51.69309228574507),
    (2.0, 100.0, -102.05813713541278),
    (2.0, 300.0, -302.6198602882864),
    (2.0, 700.0, -703.0470721556873),
    (2.5, 1e-08, 47.37610550119375),
    (2.5, 0.0001, 24.350254569586628),
    (2.5, 0.1, 7.0792022745188135),
    (2.5, 0.5, 3.0168039220911407),
    (2.5, 1.0, 1.1717015017000407),
    (2.5, 1.9, -0.7684314225898972),
    (2.5, 2.0, -0.9421272412935991),
    (2.5, 2.1, -1.110926515604493),
    (2.5, 2.5, -1.746537218769585),
    (2.5, 5.0, -5.036603312746961),
    (2.5, 10.0, -10.640322251618633),
    (2.5, 50.0, -51.6708198067879),
    (2.5, 100.0, -102.04694371838043),
    (2.5, 300.0, -302.61611655107447),
    (2.5, 700.0, -703.0454661618064),
    (3.0, 1e-08, 57.34148377353693),
    (3.0, 0.0001, 29.710462656358384),
    (3.0, 0.1, 8.98594759451198),
    (3.0, 0.5, 4.128067973791763),
    (3.0, 1.0, 1.960272630870733),
    (3.0, 1.9, -0.2424125621477016),
    (3.0, 2.0, -0.4348135034711489),
    (3.0, 2.1, -0.6210411111723558),
    (3.0, 2.5, -1.3159210962788395),
    (3.0, 5.0, -4.792492013497251),
    (3.0, 10.0, -10.510357949779035),
    (3.0, 50.0, -51.64360220199409),
    (3.0, 100.0, -102.03326343123955),
    (3.0, 300.0, -302.61154089326755),
    (3.0, 700.0, -703.0435032820596),
    (4.7, 1e-08, 91.87824921096349),
    (4.7, 0.0001, 48.58964946199975),
    (4.7, 0.1, 16.122524060282977),
    (4.7, 0.5, 8.542001735587277),
    (4.7, 1.0, 5.234287819800871),
    (4.7, 1.9, 2.049908692367589),
    (4.7, 2.0, 1.784488094182779),
    (4.7, 2.1, 1.5297636891450144),
    (4.7, 2.5, 0.5983839602009651),
    (4.7, 5.0, -3.66419864000411),
    (4.7, 10.0, -9.897842638016005),
    (4.7, 50.0, -51.5141113248644),
    (4.7, 100.0, -101.96815364283897),
    (4.7, 300.0, -302.5897610788758),
    (4.7, 700.0, -703.0341599995445),
    (7.5, 1e-08, 150.19492649004113),
    (7.5, 0.0001, 81.11737369983513),
    (7.5, 0.1, 29.308824505915663),
    (7.5, 0.5, 17.228817761210983),
    (7.5, 1.0, 12.001492349821895),
    (7.5, 1.9, 7.0887557499655705),
    (7.5, 2.0, 6.689431485642536),
    (7.5, 2.1, 6.308169593794173),
    (7.5, 2.5, 4.932174180924464),
    (7.5, 5.0, -0.9251885350386293),
    (7.5, 10.0, -8.34264780515979),
    (7.5, 50.0, -51.17669118898583),
    (7.5, 100.0, -101.79830659434955),
    (7.5, 300.0, -302.5329263816374),
    (7.5, 700.0, -703.0097777248898),
    (10.0, 1e-08, 203.24695954464462),
    (10.0, 0.0001, 111.14355582460503),
    (10.0, 0.1, 42.06572526210593),
    (10.0, 0.5, 25.964682476379306),
    (10.0, 1.0, 19.012422299626312),
    (10.0, 1.9, 12.521952290593253),
    (10.0, 2.0, 11.998324991686166),
    (10.0, 2.1, 11.499195441874088),
    (10.0, 2.5, 9.705458257611825),
    (10.0, 5.0, 2.2781451384736613),
    (10.0, 10.0, -6.428881542962596),
    (10.0, 50.0, -50.74559526431573),
    (10.0, 100.0, -101.58091424896992),
    (10.0, 300.0, -302.46014124690475),
    (10.0, 700.0, -702.9785508386581),
];
